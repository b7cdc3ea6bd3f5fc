"""Exception types shared across the package."""


class GlxError(Exception):
    """Base class for all errors raised by glx."""


class NotPositiveDefinite(GlxError, ValueError):
    """A matrix expected to be positive definite failed its Cholesky test.

    Attributes
    ----------
    pivot : int
        Zero-based index of the first pivot that was not strictly positive.
    """

    def __init__(self, pivot, message=None):
        self.pivot = int(pivot)
        super().__init__(message or f"matrix is not positive definite (pivot {self.pivot})")


class NonConvergence(GlxError, RuntimeError):
    """An iterative routine hit its iteration cap.

    ``best`` holds the last iterate when one is available.
    """

    def __init__(self, message, best=None, iterations=None):
        super().__init__(message)
        self.best = best
        self.iterations = iterations


class DegenerateColumn(GlxError, ValueError):
    """A sample column has zero variance."""

    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"constant feature(s) at column(s) {self.columns}")


class TieAtBoundary(GlxError, ValueError):
    """Two adjacent magnitudes are equal, so no threshold separates them."""


class DegenerateEntry(GlxError, ValueError):
    """A normalized residue entry has magnitude >= 1."""

    def __init__(self, i, j, value):
        self.i, self.j, self.value = int(i), int(j), float(value)
        super().__init__(
            f"normalized residue entry ({self.i}, {self.j}) = {self.value!r} has magnitude >= 1"
        )


class NotAcyclic(GlxError, ValueError):
    """A tree-only construction received a graph with a cycle."""


class ConditionsFailed(GlxError):
    """The exact closed form was requested but some component failed its checks.

    ``report`` is the full :class:`~glx.closed_form.ConditionReport`; ``partial``
    is the mixed-label solution (approximate on failing components).
    """

    def __init__(self, report, partial=None):
        self.report = report
        self.partial = partial
        failed = [c.index for c in report.components if not c.passed]
        super().__init__(f"closed-form conditions failed on component(s) {failed}")


class CertificateUnavailable(GlxError):
    """The epsilon certificate cannot be computed for this instance."""


class NoPdCompletion(GlxError, ValueError):
    """No positive-definite completion could be found."""


class UndefinedRate(GlxError, ZeroDivisionError):
    """A TPR/FPR denominator is zero."""


class ZeroMatrix(GlxError, ValueError):
    """A similarity argument equals the identity, so its direction is undefined."""
