"""Shared test utilities: central finite differences against autograd."""

import torch


def central_difference(f, x: torch.Tensor, eps: float = 1e-6) -> torch.Tensor:
    """Numerical gradient of scalar-valued f at x, one coordinate at a time."""
    x = x.detach().clone()
    grad = torch.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.numel()):
        orig = flat[i].item()
        flat[i] = orig + eps
        fp = float(f(x).detach())
        flat[i] = orig - eps
        fm = float(f(x).detach())
        flat[i] = orig
        gflat[i] = (fp - fm) / (2 * eps)
    return grad


def max_rel_error(analytic: torch.Tensor, numeric: torch.Tensor) -> float:
    """Infinity-norm relative difference between two gradients."""
    scale = max(float(analytic.abs().max()), float(numeric.abs().max()), 1e-10)
    return float((analytic - numeric).abs().max()) / scale


def fd_check(f, x: torch.Tensor, eps: float = 1e-6, tol: float = 1e-4) -> float:
    """Assert that autograd's gradient of f w.r.t. x matches finite differences."""
    leaf = x.detach().clone().requires_grad_(True)
    out = f(leaf)
    (analytic,) = torch.autograd.grad(out, leaf)
    numeric = central_difference(f, x, eps)
    err = max_rel_error(analytic, numeric)
    assert err < tol, f"gradient mismatch: max rel err {err:.3e} >= {tol}"
    return err


def fd_check_subset(f, x: torch.Tensor, n_coords: int, seed: int = 0,
                    eps: float = 1e-6, tol: float = 1e-4) -> float:
    """fd_check restricted to a seeded random subset of coordinates of x."""
    leaf = x.detach().clone().requires_grad_(True)
    out = f(leaf)
    (analytic,) = torch.autograd.grad(out, leaf)
    g = torch.Generator().manual_seed(seed)
    idx = torch.randperm(x.numel(), generator=g)[:n_coords]
    flat = x.detach().clone().reshape(-1)
    numeric = torch.zeros(len(idx), dtype=x.dtype)
    for k, i in enumerate(idx):
        orig = flat[i].item()
        flat[i] = orig + eps
        fp = float(f(flat.reshape(x.shape)).detach())
        flat[i] = orig - eps
        fm = float(f(flat.reshape(x.shape)).detach())
        flat[i] = orig
        numeric[k] = (fp - fm) / (2 * eps)
    err = max_rel_error(analytic.reshape(-1)[idx], numeric)
    assert err < tol, f"gradient mismatch on subset: max rel err {err:.3e} >= {tol}"
    return err


def fd_check_param(f_scalar, param: torch.nn.Parameter,
                   eps: float = 1e-6, tol: float = 1e-4) -> float:
    """Same check for a module parameter; f_scalar() closes over the module."""
    out = f_scalar()
    (analytic,) = torch.autograd.grad(out, param)
    numeric = torch.zeros_like(param)
    flat = param.data.reshape(-1)
    nflat = numeric.reshape(-1)
    for i in range(flat.numel()):
        orig = flat[i].item()
        flat[i] = orig + eps
        fp = float(f_scalar().detach())
        flat[i] = orig - eps
        fm = float(f_scalar().detach())
        flat[i] = orig
        nflat[i] = (fp - fm) / (2 * eps)
    err = max_rel_error(analytic.detach(), numeric)
    assert err < tol, f"parameter gradient mismatch: max rel err {err:.3e} >= {tol}"
    return err
