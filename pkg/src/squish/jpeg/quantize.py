import torch

from squish.autodiff import round_half_away, round_ste


def _round_cubic(u: torch.Tensor) -> torch.Tensor:
    # r(u) = round(u) + (u - round(u))^3, derivative 3 (u - round(u))^2
    rounded = round_half_away(u)
    return rounded + (u - rounded) ** 3


def _round_exact(u: torch.Tensor) -> torch.Tensor:
    return round_half_away(u)


_relaxations = {
    'cubic': _round_cubic,
    'ste': round_ste,
    'exact': _round_exact,
}


def quantize_relaxed(coeffs: torch.Tensor, table: torch.Tensor, relaxation: str = 'cubic') -> torch.Tensor:
    """ Quantize then dequantize DCT coefficients, c -> r(c / t) * t.

    Args:
        coeffs: DCT coefficients, trailing dims broadcastable against `table`.
        table: Quantization step per coefficient, entries >= 1.
        relaxation: 'cubic' (smooth surrogate of rounding), 'ste' (exact forward, identity
            backward) or 'exact' (no gradient, integer reference path).

    Returns:
        Dequantized coefficients, same shape as coeffs.
    """
    if relaxation not in _relaxations:
        raise ValueError(
            f'Unknown relaxation {relaxation!r}, must be one of {list(_relaxations.keys())}.')
    table = table.to(coeffs.dtype)
    assert bool((table >= 1).all()), 'Quantization table entries must be >= 1'
    return _relaxations[relaxation](coeffs / table) * table
