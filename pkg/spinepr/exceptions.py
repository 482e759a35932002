"""All spinepr-specific exceptions

Classes:
    SpinEPRException
    InvalidParameterException
    ConfigurationException
    RoutingException
    ResourceLimitException
    NumericalFailureException
    DepletedLocalOscillatorException
    DegenerateMeasureException
    CriterionUndefinedException
    FormulaBreakdownException
    RootNotFoundException
    InvalidDataException
    NoEntanglementException
    ValidationFailedException
"""
class SpinEPRException(Exception):
    pass


class InvalidParameterException(SpinEPRException):
    pass


class ConfigurationException(SpinEPRException):
    pass


class RoutingException(SpinEPRException):
    pass


class ResourceLimitException(SpinEPRException):
    pass


class NumericalFailureException(SpinEPRException):
    pass


class DepletedLocalOscillatorException(SpinEPRException):
    pass


class DegenerateMeasureException(SpinEPRException):
    pass


class CriterionUndefinedException(SpinEPRException):
    pass


class FormulaBreakdownException(SpinEPRException):
    pass


class RootNotFoundException(SpinEPRException):
    pass


class InvalidDataException(SpinEPRException):
    pass


class NoEntanglementException(SpinEPRException):
    pass


class ValidationFailedException(SpinEPRException):
    pass
