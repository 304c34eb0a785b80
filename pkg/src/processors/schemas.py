import pandera as pa
from pandera import Check, Column, DataFrameSchema

from src.utils.logger import get_logger

logger = get_logger(__name__)


class ArtifactGate:
    """
    Data contracts for the CSV artifacts.
    Violations are logged, the frame is still written.
    """

    TrajectoryTable = DataFrameSchema(
        {
            "t": Column(float, checks=Check.ge(0)),
            "V": Column(float, checks=[Check.ge(0), Check.le(1 + 1e-9)]),
            "lnV": Column(float, checks=Check.le(1e-9)),
            "jumped_channel": Column(str),
            "mw": Column(float, nullable=True),
            "mj": Column(float, nullable=True),
        },
        checks=Check(lambda df: df["t"].is_monotonic_increasing, error="times must increase"),
        strict=True,
    )

    EnsembleTable = DataFrameSchema(
        {
            "t": Column(float, checks=Check.ge(0)),
            "mean_V": Column(float, checks=[Check.ge(0), Check.le(1 + 1e-9)]),
            "stderr_V": Column(float, checks=Check.ge(0)),
            "n": Column(int, checks=Check.ge(1)),
        },
        checks=Check(lambda df: df["t"].is_monotonic_increasing, error="times must increase"),
        strict=True,
    )

    @staticmethod
    def enforce(df, schema: DataFrameSchema, name: str) -> bool:
        """Validate lazily; returns True when the contract holds."""
        try:
            schema.validate(df, lazy=True)
            return True
        except pa.errors.SchemaErrors as err:
            logger.warning(f"⚠️ {name}: {len(err.failure_cases)} contract violations")
            logger.warning(err.failure_cases.head(5).to_string())
            return False
