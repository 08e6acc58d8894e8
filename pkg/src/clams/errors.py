"""Exception hierarchy shared by every module in the package."""


class ClamsError(Exception):
    """Base class for all errors raised by this package."""


class EmptyInput(ClamsError):
    pass


class NonFinite(ClamsError):
    pass


class PreconditionError(ClamsError, ValueError):
    pass


class DegenerateFit(ClamsError):
    pass


class TooShort(ClamsError):
    pass


class DegenerateComponent(ClamsError):
    pass


class TooFewRows(ClamsError):
    pass


class FormatVersionMismatch(ClamsError):
    pass


class ChecksumMismatch(ClamsError):
    pass


class OutOfRange(ClamsError, ValueError):
    pass


class ParseError(ClamsError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class RangeError(ParseError):
    pass


class LengthMismatch(ClamsError):
    pass


class EmptyOverlap(ClamsError):
    pass


class TooFewClusterings(ClamsError):
    pass


class ZeroVariance(ClamsError):
    pass


class SingleCluster(ClamsError):
    pass


class AllRunsFailed(ClamsError):
    pass


class KTooLarge(ClamsError, ValueError):
    pass
