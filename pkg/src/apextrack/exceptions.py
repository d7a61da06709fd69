"""Exception hierarchy.

Everything derives from ``ApexTrackError`` and from ``ValueError`` so callers
that only care about "bad input" can catch the builtin.
"""


class ApexTrackError(Exception):
    pass


class ValidationError(ApexTrackError, ValueError):
    pass


class RangeError(ValidationError):
    """A coordinate fell outside the image or grid."""


class ShapeError(ValidationError):
    """Tensor shapes or grids do not agree."""


class OrderingError(ValidationError):
    """Frame indices went backwards."""


class SizeError(ValidationError):
    """Instance too large for exhaustive enumeration."""


class AnnotationParseError(ValidationError):
    def __init__(self, message, document_index=None, source=None):
        self.document_index = document_index
        self.source = source
        where = []
        if source is not None:
            where.append(str(source))
        if document_index is not None:
            where.append(f"document {document_index}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class SchemaError(ValidationError):
    def __init__(self, key, context="COCO document"):
        self.key = key
        super().__init__(f"{context} is missing required key {key!r}")


class AmbiguityError(ValidationError):
    def __init__(self, image_id, message=None):
        self.image_id = image_id
        super().__init__(message or f"image {image_id} has more than one box of the same class")


class TrajectoryBoundsError(ValidationError):
    pass


class TensorFileError(ApexTrackError, ValueError):
    pass


class BadMagicError(TensorFileError):
    pass


class VersionMismatchError(TensorFileError):
    pass


class TruncatedPayloadError(TensorFileError):
    pass


class NaNPayloadError(TensorFileError):
    pass
