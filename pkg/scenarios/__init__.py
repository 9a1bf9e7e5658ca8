"""Built-in scenario documents, shipped as package data."""
