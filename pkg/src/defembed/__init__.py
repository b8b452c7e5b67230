"""Definition-to-embedding encoders with reverse-dictionary, crossword and
cross-lingual retrieval, an HTTP query service, and a training CLI."""

__version__ = "0.1.0"
