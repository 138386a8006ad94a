"""corpusforge: corpus curation for multitask speech-to-text training."""

__version__ = "0.1.0"
