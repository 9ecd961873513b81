"""Reference numpy implementation of the jet propagation kernels.

Forward propagation pushes (value, gradient, Laplacian) triples through a
residual network in one sweep; the backward kernels turn cotangents of the
three outputs into gradients with respect to every parameter block.  The
compiled extension implements the same contracts; this module is the ground
truth the extension is tested against and the fallback when it is missing.

Shapes use n = batch, d = input dim, w = width, o = output dim, L = blocks.
All arrays are float64 and C-contiguous.
"""

from __future__ import annotations

import numpy as np

from ..activations import RECU, REQU

BACKEND_NAME = "numpy"


def _act(power: int):
    return REQU if power == 2 else RECU


# ---------------------------------------------------------------------------
# Residual networks
# ---------------------------------------------------------------------------


def resnet_forward(X, A, W, b, U, power: int, order: int, with_tape: bool):
    """Propagate jets through a residual network.

    Args:
        X: Sample matrix (n, d).
        A: Lift matrix (w, d); the lift has no bias.
        W: Block matrices (L, w, w).
        b: Block biases (L, w).
        U: Head matrix (o, w); the head has no bias.
        power: Activation exponent, 2 (ReQU) or 3 (ReCU).
        order: 0 for values, 1 to add gradients, 2 to add Laplacians.
        with_tape: Record intermediates for a later backward pass.

    Returns:
        (Y, J, LAP, tape): values (n, o); input derivatives (n, d, o) or
        None; Laplacians (n, o) or None; opaque tape or None.
    """
    act = _act(power)
    n = X.shape[0]
    L = W.shape[0]

    H = X @ A.T
    G = np.broadcast_to(A.T[None, :, :], (n,) + A.T.shape).copy() if order >= 1 else None
    Lap = np.zeros_like(H) if order >= 2 else None

    Hs, Gs, Ls, Zs, GZs, LZs = [H], [G], [Lap], [], [], []
    for j in range(L):
        Z = H @ W[j].T + b[j]
        S1 = act.d1(Z)
        H = act.value(Z) + H
        GZ = LZ = None
        if order >= 1:
            GZ = G @ W[j].T
            Gnew = S1[:, None, :] * GZ + G
        if order >= 2:
            LZ = Lap @ W[j].T
            Lap = act.d2(Z) * np.einsum("nkj,nkj->nj", GZ, GZ) + S1 * LZ + Lap
        if order >= 1:
            G = Gnew
        if with_tape:
            Hs.append(H)
            Gs.append(G)
            Ls.append(Lap)
            Zs.append(Z)
            GZs.append(GZ)
            LZs.append(LZ)

    Y = H @ U.T
    J = G @ U.T if order >= 1 else None
    LAP = Lap @ U.T if order >= 2 else None
    tape = (X, Hs, Gs, Ls, Zs, GZs, LZs, order) if with_tape else None
    return Y, J, LAP, tape


def resnet_backward(A, W, b, U, power: int, tape, Ybar, Jbar, LAPbar):
    """Parameter gradients from output cotangents.

    ``Ybar`` (n, o), ``Jbar`` (n, d, o), ``LAPbar`` (n, o) may each be None;
    missing cotangents are treated as zero.  Cotangents beyond the order the
    tape was recorded at are rejected.

    Returns:
        (Abar, Wbar, bbar, Ubar) with the shapes of A, W, b, U.
    """
    X, Hs, Gs, Ls, Zs, GZs, LZs, order = tape
    if order < 1 and Jbar is not None:
        raise ValueError("tape was recorded without gradients")
    if order < 2 and LAPbar is not None:
        raise ValueError("tape was recorded without Laplacians")
    act = _act(power)
    n, d = X.shape
    w = A.shape[0]
    L = W.shape[0]

    Hbar = Ybar @ U if Ybar is not None else np.zeros((n, w))
    Gbar = Jbar @ U if (order >= 1 and Jbar is not None) else None
    if order >= 1 and Gbar is None:
        Gbar = np.zeros((n, d, w))
    Lbar = LAPbar @ U if (order >= 2 and LAPbar is not None) else None
    if order >= 2 and Lbar is None:
        Lbar = np.zeros((n, w))

    Ubar = np.zeros_like(U)
    if Ybar is not None:
        Ubar += Ybar.T @ Hs[L]
    if Jbar is not None:
        Ubar += np.einsum("nka,nki->ai", Jbar, Gs[L])
    if LAPbar is not None:
        Ubar += LAPbar.T @ Ls[L]

    Wbar = np.zeros_like(W)
    bbar = np.zeros_like(b)
    for j in range(L - 1, -1, -1):
        Z, GZ, LZ = Zs[j], GZs[j], LZs[j]
        Hin, Gin, Lin = Hs[j], Gs[j], Ls[j]
        S1 = act.d1(Z)
        Zbar = Hbar * S1
        if order >= 1:
            S2 = act.d2(Z)
            Zbar = Zbar + S2 * np.einsum("nkj,nkj->nj", Gbar, GZ)
            GZbar = Gbar * S1[:, None, :]
        if order >= 2:
            Q = np.einsum("nkj,nkj->nj", GZ, GZ)
            Zbar = Zbar + Lbar * (act.d3(Z) * Q + S2 * LZ)
            GZbar = GZbar + 2.0 * (Lbar * S2)[:, None, :] * GZ
            LZbar = Lbar * S1

        Wb = Zbar.T @ Hin
        if order >= 1:
            Wb += np.einsum("nkj,nki->ji", GZbar, Gin)
        if order >= 2:
            Wb += LZbar.T @ Lin
        Wbar[j] = Wb
        bbar[j] = Zbar.sum(axis=0)

        Hbar = Hbar + Zbar @ W[j]
        if order >= 1:
            Gbar = Gbar + GZbar @ W[j]
        if order >= 2:
            Lbar = Lbar + LZbar @ W[j]

    Abar = Hbar.T @ X
    if order >= 1:
        Abar = Abar + np.einsum("nki->ik", Gbar)
    return Abar, Wbar, bbar, Ubar


# ---------------------------------------------------------------------------
# Two-layer networks
# ---------------------------------------------------------------------------


def two_layer_forward(X, c, a, W, b, power: int, order: int, with_tape: bool):
    """Jets of phi(x) = c + (1/m) sum_i a_i act(w_i . x + b_i).

    Returns (val (n,), grad (n, d) or None, lap (n,) or None, tape or None).
    """
    act = _act(power)
    m = a.shape[0]
    Z = X @ W.T + b
    scaled = a / m
    val = c + act.value(Z) @ scaled
    grad = lap = None
    if order >= 1:
        S1 = act.d1(Z)
        grad = (S1 * scaled) @ W
    if order >= 2:
        w2 = np.einsum("id,id->i", W, W)
        lap = act.d2(Z) @ (scaled * w2)
    tape = (X, Z, order) if with_tape else None
    return val, grad, lap, tape


def two_layer_backward(c, a, W, b, power: int, tape, vbar, gbar, lbar):
    """Gradients of a two-layer net w.r.t. (c, a, W, b) from jet cotangents.

    ``vbar`` (n,), ``gbar`` (n, d), ``lbar`` (n,) may each be None.
    Returns (cbar, abar, Wbar, bbar).
    """
    X, Z, order = tape
    if order < 1 and gbar is not None:
        raise ValueError("tape was recorded without gradients")
    if order < 2 and lbar is not None:
        raise ValueError("tape was recorded without Laplacians")
    act = _act(power)
    m = a.shape[0]
    scaled = a / m
    w2 = np.einsum("id,id->i", W, W)
    S1 = act.d1(Z)

    cbar = 0.0
    abar = np.zeros_like(a)
    Wbar = np.zeros_like(W)
    Zchain = np.zeros_like(Z)

    if vbar is not None:
        cbar = float(vbar.sum())
        abar += (vbar @ act.value(Z)) / m
        Zchain += vbar[:, None] * S1
    if gbar is not None:
        gw = gbar @ W.T
        abar += np.einsum("ni,ni->i", S1, gw) / m
        Zchain += act.d2(Z) * gw
        Wbar += (S1 * scaled).T @ gbar
    if lbar is not None:
        S2 = act.d2(Z)
        abar += (lbar @ S2) * w2 / m
        Zchain += act.d3(Z) * (lbar[:, None] * w2)
        Wbar += 2.0 * (scaled * (lbar @ S2))[:, None] * W

    Zbar = Zchain * scaled
    Wbar += Zbar.T @ X
    bbar = Zbar.sum(axis=0)
    return cbar, abar, Wbar, bbar
