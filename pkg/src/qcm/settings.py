from pydantic import BaseModel, ConfigDict, Field


class QcmSettings(BaseModel):
    """Numerical thresholds carried by every store."""

    model_config = ConfigDict(frozen=True)

    max_qubits: int = Field(default=12, ge=1, description="Largest joint register a density matrix may span.")
    structural_tol: float = Field(default=1e-12, gt=0, description="Tolerance for trace, Hermiticity and unitarity checks.")
    psd_tol: float = Field(default=1e-10, gt=0, description="Slack on the smallest eigenvalue in the PSD check.")
    verify_psd: bool = Field(default=False, description="Run the eigenvalue check on every constructed matrix.")
    den_floor: float = Field(default=1e-9, ge=0, description="Smallest denominator magnitude a real4 may decode with.")
    divisor_guard: float = Field(default=1e-3, ge=0, description="Smallest exact divisor an expression may divide by.")


DEFAULT_SETTINGS = QcmSettings()
