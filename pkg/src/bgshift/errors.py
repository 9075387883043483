"""Exception types raised across the toolkit."""


class BgShiftError(Exception):
    """Base class for all toolkit errors."""


class EmptyMask(BgShiftError, ValueError):
    pass


class OutOfBounds(BgShiftError, ValueError):
    pass


class EmptyDonorPool(BgShiftError, ValueError):
    pass


class EndpointUnreachable(BgShiftError, ConnectionError):
    pass


class BackendFailure(BgShiftError, RuntimeError):
    pass


class PartialFailure(BgShiftError, RuntimeError):
    """Some prompts failed during background generation.

    ``failed`` lists ``(prompt, seed, message)`` tuples.
    """

    def __init__(self, failed):
        self.failed = list(failed)
        super().__init__(f"{len(self.failed)} background generation(s) failed")


class PoolTooSmall(BgShiftError, ValueError):
    pass


class PoolOverlap(BgShiftError, ValueError):
    pass


class BudgetTooSmall(BgShiftError, ValueError):
    def __init__(self, categories_uncovered):
        self.categories_uncovered = sorted(categories_uncovered)
        super().__init__(
            f"budget cannot cover categories {self.categories_uncovered}"
        )


class EmptyRegion(BgShiftError, ValueError):
    pass


class ZeroNormVector(BgShiftError, ValueError):
    pass


class NonPositiveTau(BgShiftError, ValueError):
    pass


class MissingTextBatch(BgShiftError, ValueError):
    pass


class NonFinite(BgShiftError, ValueError):
    pass


class EmptyGroundTruth(BgShiftError, ValueError):
    pass


class EmptyList(BgShiftError, ValueError):
    pass


class ZeroCleanScore(BgShiftError, ValueError):
    pass


class ConfigInvalid(BgShiftError, ValueError):
    pass


class IoFailure(BgShiftError, OSError):
    def __init__(self, path, message):
        self.path = str(path)
        super().__init__(f"{self.path}: {message}")
