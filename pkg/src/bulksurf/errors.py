class StepFailure(RuntimeError):
    """A sub-solver failed inside a time step."""

    def __init__(self, message, stage=None, step=None):
        super().__init__(message)
        self.stage = stage
        self.step = step

    def __str__(self):
        where = []
        if self.step is not None:
            where.append(f"step {self.step}")
        if self.stage is not None:
            where.append(self.stage)
        prefix = f"[{', '.join(where)}] " if where else ""
        return prefix + super().__str__()
