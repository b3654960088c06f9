"""
Hierarchy of exceptions to specify cgmc's errors.

:author: Athanasios Anastasiou
:date: Oct 2026
"""

class CGMCError(Exception):
    pass

class LatticeSpecError(CGMCError):
    """
    Raised when a lattice, potential or configuration is constructed with invalid parameters.
    """
    pass

class IllegalEventError(CGMCError):
    """
    An event was applied to a configuration that cannot undergo it (e.g. desorbing from an
    empty site). This always indicates a corrupted rate table.
    """
    pass

class AbsorbingStateError(CGMCError):
    pass

class EnsembleMismatchError(CGMCError):
    """
    Two ensembles (or distributions) that are compared are not defined over the same grid.
    """
    pass

class StateSpaceTooLargeError(CGMCError):
    pass

class ConfigError(CGMCError):
    """
    Collects a list of errors encountered while loading an experiment configuration.
    """
    def __init__(self, errors):
        super().__init__("\n".join(errors))
        self._errors = list(errors)

    @property
    def errors(self):
        return self._errors

class OutputError(CGMCError):
    """
    The output directory of an experiment cannot be created or written to.
    """
    pass
