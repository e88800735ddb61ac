"""Exception types shared across the toolkit."""


class FunduslocError(Exception):
    """Base class for all toolkit errors."""


# -- imaging ---------------------------------------------------------------

class InvalidChannelCount(FunduslocError):
    """Channel conversion requested on an image with the wrong channel count."""


class DegenerateHistogram(FunduslocError):
    """Global thresholding needs at least two distinct intensity values."""


# -- localizer -------------------------------------------------------------

class RetinaNotFound(FunduslocError):
    """No plausible fundus region found in the image."""


class NoCandidateRegion(FunduslocError):
    """The pipeline left no blob large enough to be a disc candidate."""


class OutOfBounds(FunduslocError):
    """A geometric result lies entirely outside the image."""


class ConfigError(FunduslocError):
    """Malformed localizer config file or value."""


# -- evaluation ------------------------------------------------------------

class InvalidBox(FunduslocError):
    """Bounding box with non-positive width or height."""


class EmptyInput(FunduslocError):
    """An evaluation operation received no data."""


class UndefinedROC(FunduslocError):
    """ROC requires at least one positive and one negative example."""


class Unreachable(FunduslocError):
    """No operating point satisfies the requested specificity target."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class StratificationImpossible(FunduslocError):
    """A class has fewer members than the requested fold count."""


# -- annotation ------------------------------------------------------------

class EmptyDataset(FunduslocError):
    """Manifest contains no images."""


class NotFound(FunduslocError):
    """No annotation record for the requested image id."""


class VersionConflict(FunduslocError):
    """Concurrent review detected: the submitted version token is stale."""

    def __init__(self, message, current_version=None):
        super().__init__(message)
        self.current_version = current_version


class StoreCorrupt(FunduslocError):
    """Decision log contains a malformed entry before the final line."""
