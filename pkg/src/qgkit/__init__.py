"""Question generation toolkit: an interrogative-word classifier feeding a
copy-mechanism sequence-to-sequence generator, with its own autodiff core,
data pipeline, evaluation metrics, and experiment CLI."""

__version__ = "0.1.0"
