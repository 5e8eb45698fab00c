"""Exception types raised by the pipeline; the CLI maps them to exit codes."""


class PipelineError(RuntimeError):
    code = "PIPELINE_ERROR"


class InfeasibleScenario(PipelineError):
    """The phase-I program proves the constraint set empty.

    ``certificate`` holds the evidence: either a Farkas ray from the conic
    solver or the phase-I dual bound exceeding the power budget.
    """

    code = "INFEASIBLE_SCENARIO"

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate or {}


class SolverFailure(PipelineError):
    code = "SOLVER_FAILURE"

    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status


class MonotonicityViolation(PipelineError):
    code = "MONOTONICITY_VIOLATION"


class DegenerateUsefulPower(PipelineError):
    code = "DEGENERATE_USEFUL_POWER"


class PSDViolation(PipelineError):
    code = "PSD_VIOLATION"
