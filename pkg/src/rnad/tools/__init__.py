"""Small standalone utilities used by tests and external clients."""
