class ErsatzError(Exception):
    """Base class for pipeline errors."""


class ManifestError(ErsatzError):
    pass


class ManifestParseError(ManifestError):
    pass


class ManifestSchemaError(ManifestError):
    pass


class ManifestDomainError(ManifestError):
    pass


class MachineFileError(ErsatzError):
    pass


class DegenerateProperty(ErsatzError):
    """Raised when a property has fewer distinct values than requested clusters."""

    def __init__(self, property: str, distinct: int, eta: int):
        super().__init__(f"property {property!r} has {distinct} distinct values, fewer than eta={eta}")
        self.property = property
        self.distinct = distinct
        self.eta = eta


class AttributionError(ErsatzError):
    pass


class KBFormatError(ErsatzError):
    pass


class KBVersionError(KBFormatError):
    pass


class KBChecksumError(KBFormatError):
    pass


class UnknownClassError(ErsatzError, KeyError):
    def __init__(self, label: str):
        super().__init__(label)
        self.label = label

    def __str__(self) -> str:
        return f"unknown class: {self.label!r}"
