# Importing the logger module registers the TRACE level used across the package.
from flowBR import logger as _logger  # noqa: F401
