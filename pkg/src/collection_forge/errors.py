"""Exception hierarchy shared by all collection_forge modules."""


class CollectionForgeError(Exception):
    """Base class for all library errors."""


class InvalidImage(CollectionForgeError):
    """Raster input is unusable (zero area, wrong shape, ...)."""


class ParseError(CollectionForgeError):
    """Malformed on-disk artifact (PPM, CFM1 matrix, manifest)."""


class NumericError(CollectionForgeError):
    """Non-finite values or a solver that cannot proceed."""


class InsufficientData(CollectionForgeError):
    """Fewer samples than required (e.g. n < n_atoms)."""


class SchemaMismatch(CollectionForgeError):
    """Feature schema / dictionary / descriptor layouts disagree."""


class LayoutError(CollectionForgeError):
    """Group spans do not partition the coefficient range."""


class EmptyCollection(CollectionForgeError):
    """An image collection with no members."""


class MissingDescriptor(CollectionForgeError):
    """A referenced collection id has no descriptor."""

    def __init__(self, collection_id):
        super().__init__(f"no descriptor for collection {collection_id!r}")
        self.collection_id = collection_id


class EmptyEvaluation(CollectionForgeError):
    """Evaluation requested over zero ranked lists."""


class DegenerateObjective(CollectionForgeError):
    """Metric learning objective is identically zero (all-zero deltas)."""


class TuningWarning(UserWarning):
    """Lambda tuning could not reach the requested density window."""
