"""Exception taxonomy for the exporter."""


class ExporterError(Exception):
    """Base class for every error this package raises on purpose."""


class ExporterConfigError(ExporterError):
    """Invalid configuration value or combination."""


class CorpusReadError(ExporterError):
    """Canonical corpus file is missing fields or malformed."""
