import numpy as np

from ..core import MeasurementGrid


def digitize(m: MeasurementGrid | np.ndarray, scale: float = 1.0, offset: float = 2048.0,
             bits: int = 12) -> np.ndarray:
    """ADC counts: clamp(round(m * scale + offset), 0, 2**bits - 1) as int64.

    Rounding is half-to-even.
    """
    if not 1 <= bits <= 16:
        raise ValueError(f"bits must lie in [1, 16], got {bits}")
    samples = m.samples if isinstance(m, MeasurementGrid) else np.asarray(m, dtype=np.float64)
    adc = np.rint(samples * scale + offset)
    np.clip(adc, 0, (1 << bits) - 1, out=adc)
    return adc.astype(np.int64)
