"""Exception types, each mapped to a CLI exit status."""


class TechRulesError(Exception):
    exit_code = 1
    stage = "run"


class ConfigError(TechRulesError, ValueError):
    exit_code = 2
    stage = "config"


class DataError(TechRulesError, ValueError):
    exit_code = 3
    stage = "data"


class NumericalError(TechRulesError, ArithmeticError):
    exit_code = 4
    stage = "numeric"
