class InvalidModelError(ValueError):
    pass


class UnsupportedModelError(ValueError):
    pass


class InvalidCoveringError(ValueError):
    pass


class NumericFailureError(ArithmeticError):
    pass


class CloudParseError(ValueError):
    """Malformed point-cloud or dictionary file; ``lineno`` is 1-based."""

    def __init__(self, path, lineno, message):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")
