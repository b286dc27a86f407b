from dataclasses import dataclass
from typing import Callable, Optional

import torch

from .tape import Tape


@dataclass
class CheckReport:
    """ Tape gradient vs central finite differences.

    Attributes:
        max_rel_err: max over checked elements of |g - n| / max(|g|, |n|, rel_floor).
        max_abs_err: max over checked elements of |g - n|.
        passed: max_rel_err < tol and no error.
        error: Set when the check could not be run (e.g. a non-differentiable node was hit).
    """
    max_rel_err: float
    max_abs_err: float
    passed: bool
    tol: float
    num_checked: int = 0
    error: Optional[str] = None


def grad_check(
        fn: Callable[[torch.Tensor], torch.Tensor],
        x: torch.Tensor,
        fd_step: float = 1e-3,
        tol: float = 1e-3,
        max_elements: Optional[int] = 256,
        rel_floor: float = 1e-2,
        seed: int = 0,
) -> CheckReport:
    """ Compare the float32 tape gradient of scalar fn at x against float64 central differences.

    fn must be deterministic and accept float64 input (cast any captured parameters with
    `.to(x.dtype)`). At most `max_elements` coordinates are checked, sampled with `seed`.
    """
    with Tape() as tape:
        xw = tape.watch(x.detach().float())
        out = fn(xw)
        if tape.non_differentiable:
            ops = ', '.join(sorted(set(tape.non_differentiable)))
            return CheckReport(
                float('inf'), float('inf'), False, tol, error=f'non-differentiable node: {ops}')
        grads = tape.backward(out.sum() if out.numel() == 1 else out)
    grad = grads[xw.node_id].double().reshape(-1)

    x64 = x.detach().double().reshape(-1)
    n = x64.numel()
    if max_elements is not None and n > max_elements:
        generator = torch.Generator().manual_seed(seed)
        coords = torch.randperm(n, generator=generator)[:max_elements]
    else:
        coords = torch.arange(n)

    max_rel = 0.
    max_abs = 0.
    with torch.no_grad():
        for i in coords.tolist():
            xp = x64.clone()
            xp[i] += fd_step
            xm = x64.clone()
            xm[i] -= fd_step
            fp = float(fn(xp.reshape(x.shape)))
            fm = float(fn(xm.reshape(x.shape)))
            numeric = (fp - fm) / (2 * fd_step)
            analytic = float(grad[i])
            abs_err = abs(analytic - numeric)
            rel_err = abs_err / max(abs(analytic), abs(numeric), rel_floor)
            max_abs = max(max_abs, abs_err)
            max_rel = max(max_rel, rel_err)

    return CheckReport(
        max_rel_err=max_rel,
        max_abs_err=max_abs,
        passed=max_rel < tol,
        tol=tol,
        num_checked=len(coords),
    )
