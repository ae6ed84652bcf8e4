"""toolgate: a schema-governance federation gateway for LLM tool protocols."""

__version__ = "0.1.0"
