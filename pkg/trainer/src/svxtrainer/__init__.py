"""svxtrainer: toy-scale pretrain/fine-tune consumer for svxsynth datasets."""

__version__ = "0.1.0"
