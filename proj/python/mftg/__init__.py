from ._core import (
    DomainError,
    Error,
    NumericOverflowError,
    ParseError,
    PreconditionError,
    ResourceError,
    Scenario,
    SchemaError,
    SingularityError,
    ValidationError,
    load_scenario,
    load_scenario_file,
    mean_path,
    run_cli,
    simulate,
    solve,
    verify,
)

__all__ = [
    "DomainError",
    "Error",
    "NumericOverflowError",
    "ParseError",
    "PreconditionError",
    "ResourceError",
    "Scenario",
    "SchemaError",
    "SingularityError",
    "ValidationError",
    "load_scenario",
    "load_scenario_file",
    "mean_path",
    "run_cli",
    "simulate",
    "solve",
    "verify",
]
