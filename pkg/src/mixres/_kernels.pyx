# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled jet-propagation kernels for residual networks.

Implements the same contracts as ``mixres.autodiff.kernels_np`` (see that
module for shape documentation).  Internally everything is transposed to
feature-major (w, n) scratch so the innermost loops run contiguously over
the batch axis.  Linear maps are register-blocked four output rows at a
time; each update is a pure axpy the compiler can vectorize without
reassociating floating-point sums, and the remaining reductions accumulate
in a fixed four-lane order.  Results are therefore byte-stable from run to
run.
"""

import numpy as np

BACKEND_NAME = "compiled"


cdef inline void _axpy(double alpha, const double* x, double* y, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(n):
        y[i] += alpha * x[i]


cdef inline double _asum(const double* x, Py_ssize_t n) noexcept nogil:
    cdef double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0
    cdef Py_ssize_t i = 0
    while i + 4 <= n:
        s0 += x[i]
        s1 += x[i + 1]
        s2 += x[i + 2]
        s3 += x[i + 3]
        i += 4
    while i < n:
        s0 += x[i]
        i += 1
    return (s0 + s1) + (s2 + s3)


cdef inline double _dot(const double* x, const double* y, Py_ssize_t n) noexcept nogil:
    cdef double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0
    cdef Py_ssize_t i = 0
    while i + 4 <= n:
        s0 += x[i] * y[i]
        s1 += x[i + 1] * y[i + 1]
        s2 += x[i + 2] * y[i + 2]
        s3 += x[i + 3] * y[i + 3]
        i += 4
    while i < n:
        s0 += x[i] * y[i]
        i += 1
    return (s0 + s1) + (s2 + s3)


cdef inline void _dot4(
    const double* z,
    const double* h0,
    const double* h1,
    const double* h2,
    const double* h3,
    Py_ssize_t n,
    double* out,
) noexcept nogil:
    # out[0..3] += <z, h0..h3>; one pass over z for four reductions.
    cdef double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0
    cdef Py_ssize_t i
    cdef double zi
    for i in range(n):
        zi = z[i]
        a0 += zi * h0[i]
        a1 += zi * h1[i]
        a2 += zi * h2[i]
        a3 += zi * h3[i]
    out[0] += a0
    out[1] += a1
    out[2] += a2
    out[3] += a3


cdef inline void _mm_acc(
    const double* M,
    Py_ssize_t out_stride,
    Py_ssize_t sum_stride,
    const double* B,
    Py_ssize_t b_stride,
    double* C,
    Py_ssize_t c_stride,
    Py_ssize_t n_out,
    Py_ssize_t n_sum,
    Py_ssize_t n,
) noexcept nogil:
    # C[j, :] += sum_i M[j*out_stride + i*sum_stride] * B[i*b_stride + :]
    # with the j loop blocked by four so each B row is loaded once per block.
    cdef Py_ssize_t j = 0, i, pt
    cdef double w0, w1, w2, w3
    cdef const double* brow
    cdef double* c0
    cdef double* c1
    cdef double* c2
    cdef double* c3
    while j + 4 <= n_out:
        c0 = C + j * c_stride
        c1 = c0 + c_stride
        c2 = c1 + c_stride
        c3 = c2 + c_stride
        for i in range(n_sum):
            brow = B + i * b_stride
            w0 = M[j * out_stride + i * sum_stride]
            w1 = M[(j + 1) * out_stride + i * sum_stride]
            w2 = M[(j + 2) * out_stride + i * sum_stride]
            w3 = M[(j + 3) * out_stride + i * sum_stride]
            for pt in range(n):
                c0[pt] += w0 * brow[pt]
                c1[pt] += w1 * brow[pt]
                c2[pt] += w2 * brow[pt]
                c3[pt] += w3 * brow[pt]
        j += 4
    while j < n_out:
        c0 = C + j * c_stride
        for i in range(n_sum):
            _axpy(M[j * out_stride + i * sum_stride], B + i * b_stride, c0, n)
        j += 1


cdef inline void _dot24(
    const double* z0,
    const double* z1,
    const double* h0,
    const double* h1,
    const double* h2,
    const double* h3,
    Py_ssize_t n,
    double* out0,
    double* out1,
) noexcept nogil:
    # out0[0..3] += <z0, h 0..3>, out1[0..3] += <z1, h 0..3>; eight
    # independent accumulator chains keep the FMA ports busy.
    cdef double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0
    cdef double b0 = 0.0, b1 = 0.0, b2 = 0.0, b3 = 0.0
    cdef Py_ssize_t i
    cdef double zi, wi, h
    for i in range(n):
        zi = z0[i]
        wi = z1[i]
        h = h0[i]
        a0 += zi * h
        b0 += wi * h
        h = h1[i]
        a1 += zi * h
        b1 += wi * h
        h = h2[i]
        a2 += zi * h
        b2 += wi * h
        h = h3[i]
        a3 += zi * h
        b3 += wi * h
    out0[0] += a0
    out0[1] += a1
    out0[2] += a2
    out0[3] += a3
    out1[0] += b0
    out1[1] += b1
    out1[2] += b2
    out1[3] += b3


cdef inline void _red_rows(
    const double* Z,
    Py_ssize_t z_stride,
    const double* H,
    Py_ssize_t h_stride,
    double* out,
    Py_ssize_t out_jstride,
    Py_ssize_t n_out,
    Py_ssize_t n_in,
    Py_ssize_t n,
) noexcept nogil:
    # out[j*out_jstride + i] += <Z[j, :], H[i, :]>, tiled 2x4.
    cdef Py_ssize_t j = 0, i
    cdef const double* zrow
    while j + 2 <= n_out:
        i = 0
        while i + 4 <= n_in:
            _dot24(
                Z + j * z_stride,
                Z + (j + 1) * z_stride,
                H + i * h_stride,
                H + (i + 1) * h_stride,
                H + (i + 2) * h_stride,
                H + (i + 3) * h_stride,
                n,
                out + j * out_jstride + i,
                out + (j + 1) * out_jstride + i,
            )
            i += 4
        while i < n_in:
            out[j * out_jstride + i] += _dot(Z + j * z_stride, H + i * h_stride, n)
            out[(j + 1) * out_jstride + i] += _dot(Z + (j + 1) * z_stride, H + i * h_stride, n)
            i += 1
        j += 2
    while j < n_out:
        zrow = Z + j * z_stride
        i = 0
        while i + 4 <= n_in:
            _dot4(
                zrow,
                H + i * h_stride,
                H + (i + 1) * h_stride,
                H + (i + 2) * h_stride,
                H + (i + 3) * h_stride,
                n,
                out + j * out_jstride + i,
            )
            i += 4
        while i < n_in:
            out[j * out_jstride + i] += _dot(zrow, H + i * h_stride, n)
            i += 1
        j += 1


def resnet_forward(X_, A_, W_, b_, U_, int power, int order, bint with_tape):
    """Values, input derivatives, and Laplacians of a residual network."""
    cdef double[:, ::1] A = np.ascontiguousarray(A_, dtype=np.float64)
    cdef double[:, :, ::1] W = np.ascontiguousarray(W_, dtype=np.float64)
    cdef double[:, ::1] bias = np.ascontiguousarray(b_, dtype=np.float64)
    cdef double[:, ::1] U = np.ascontiguousarray(U_, dtype=np.float64)

    Xt_arr = np.ascontiguousarray(np.asarray(X_, dtype=np.float64).T)
    cdef double[:, ::1] Xt = Xt_arr
    cdef Py_ssize_t d = Xt.shape[0], n = Xt.shape[1]
    cdef Py_ssize_t w = A.shape[0], L = W.shape[0], o = U.shape[0]

    cdef Py_ssize_t hslots = L + 1 if with_tape else 1
    cdef Py_ssize_t zslots = L if with_tape else 1

    Ht_arr = np.empty((hslots, w, n))
    Zt_arr = np.empty((zslots, w, n))
    Gt_arr = np.empty((hslots, d, w, n)) if order >= 1 else None
    GZt_arr = np.empty((zslots, d, w, n)) if order >= 1 else None
    Lt_arr = np.zeros((hslots, w, n)) if order >= 2 else None
    LZt_arr = np.empty((zslots, w, n)) if order >= 2 else None

    cdef double[:, :, ::1] Ht = Ht_arr
    cdef double[:, :, ::1] Zt = Zt_arr
    cdef double[:, :, :, ::1] Gt = Gt_arr if order >= 1 else np.empty((1, 1, 1, 1))
    cdef double[:, :, :, ::1] GZt = GZt_arr if order >= 1 else np.empty((1, 1, 1, 1))
    cdef double[:, :, ::1] Lt = Lt_arr if order >= 2 else np.empty((1, 1, 1))
    cdef double[:, :, ::1] LZt = LZt_arr if order >= 2 else np.empty((1, 1, 1))

    Yt_arr = np.empty((o, n))
    cdef double[:, ::1] Yt = Yt_arr
    Jt_arr = np.empty((d, o, n)) if order >= 1 else None
    cdef double[:, :, ::1] Jt = Jt_arr if order >= 1 else np.empty((1, 1, 1))
    Pt_arr = np.empty((o, n)) if order >= 2 else None
    cdef double[:, ::1] Pt = Pt_arr if order >= 2 else np.empty((1, 1))

    S1_arr = np.empty((w, n))
    cdef double[:, ::1] S1 = S1_arr
    Q_arr = np.empty((w, n)) if order >= 2 else None
    cdef double[:, ::1] Q = Q_arr if order >= 2 else np.empty((1, 1))

    cdef Py_ssize_t l, cur, nxt, zl, j, i, k, pt, a
    cdef double z, s0, s2
    cdef double* row
    cdef double* src

    with nogil:
        # Lift: H0 = A X, G0[k, i, :] = A[i, k], L0 = 0.
        for j in range(w):
            row = &Ht[0, j, 0]
            for pt in range(n):
                row[pt] = 0.0
        _mm_acc(&A[0, 0], d, 1, &Xt[0, 0], n, &Ht[0, 0, 0], n, w, d, n)
        if order >= 1:
            for k in range(d):
                for i in range(w):
                    z = A[i, k]
                    row = &Gt[0, k, i, 0]
                    for pt in range(n):
                        row[pt] = z

        for l in range(L):
            cur = l if with_tape else 0
            nxt = l + 1 if with_tape else 0
            zl = l if with_tape else 0

            # Pre-activations and their jet analogues.
            for j in range(w):
                row = &Zt[zl, j, 0]
                z = bias[l, j]
                for pt in range(n):
                    row[pt] = z
            _mm_acc(&W[l, 0, 0], w, 1, &Ht[cur, 0, 0], n, &Zt[zl, 0, 0], n, w, w, n)
            if order >= 1:
                for k in range(d):
                    for j in range(w):
                        row = &GZt[zl, k, j, 0]
                        for pt in range(n):
                            row[pt] = 0.0
                    _mm_acc(&W[l, 0, 0], w, 1, &Gt[cur, k, 0, 0], n, &GZt[zl, k, 0, 0], n, w, w, n)
            if order >= 2:
                for j in range(w):
                    row = &LZt[zl, j, 0]
                    for pt in range(n):
                        row[pt] = 0.0
                _mm_acc(&W[l, 0, 0], w, 1, &Lt[cur, 0, 0], n, &LZt[zl, 0, 0], n, w, w, n)
                for j in range(w):
                    row = &Q[j, 0]
                    for pt in range(n):
                        row[pt] = 0.0
                for k in range(d):
                    for j in range(w):
                        src = &GZt[zl, k, j, 0]
                        row = &Q[j, 0]
                        for pt in range(n):
                            row[pt] += src[pt] * src[pt]

            # First derivative of the activation, reused by both jet chains.
            if order >= 1:
                for j in range(w):
                    row = &Zt[zl, j, 0]
                    src = &S1[j, 0]
                    for pt in range(n):
                        z = row[pt]
                        if z > 0.0:
                            src[pt] = (2.0 * z) if power == 2 else (3.0 * z * z)
                        else:
                            src[pt] = 0.0

            # Residual updates; nxt may alias cur, every write depends only
            # on the same (j, pt) slot of the previous layer.
            if order >= 2:
                for j in range(w):
                    for pt in range(n):
                        z = Zt[zl, j, pt]
                        s2 = (2.0 if power == 2 else 6.0 * z) if z > 0.0 else 0.0
                        Lt[nxt, j, pt] = s2 * Q[j, pt] + S1[j, pt] * LZt[zl, j, pt] + Lt[cur, j, pt]
            if order >= 1:
                for k in range(d):
                    for j in range(w):
                        src = &GZt[zl, k, j, 0]
                        row = &S1[j, 0]
                        for pt in range(n):
                            Gt[nxt, k, j, pt] = row[pt] * src[pt] + Gt[cur, k, j, pt]
            for j in range(w):
                row = &Zt[zl, j, 0]
                for pt in range(n):
                    z = row[pt]
                    if z > 0.0:
                        s0 = (z * z) if power == 2 else (z * z * z)
                    else:
                        s0 = 0.0
                    Ht[nxt, j, pt] = s0 + Ht[cur, j, pt]

        # Linear head.
        cur = L if with_tape else 0
        for a in range(o):
            row = &Yt[a, 0]
            for pt in range(n):
                row[pt] = 0.0
        _mm_acc(&U[0, 0], w, 1, &Ht[cur, 0, 0], n, &Yt[0, 0], n, o, w, n)
        if order >= 1:
            for k in range(d):
                for a in range(o):
                    row = &Jt[k, a, 0]
                    for pt in range(n):
                        row[pt] = 0.0
                _mm_acc(&U[0, 0], w, 1, &Gt[cur, k, 0, 0], n, &Jt[k, 0, 0], n, o, w, n)
        if order >= 2:
            for a in range(o):
                row = &Pt[a, 0]
                for pt in range(n):
                    row[pt] = 0.0
            _mm_acc(&U[0, 0], w, 1, &Lt[cur, 0, 0], n, &Pt[0, 0], n, o, w, n)

    Y = np.ascontiguousarray(Yt_arr.T)
    J = np.ascontiguousarray(np.moveaxis(Jt_arr, 2, 0)) if order >= 1 else None
    LAP = np.ascontiguousarray(Pt_arr.T) if order >= 2 else None
    tape = (Xt_arr, Ht_arr, Gt_arr, Lt_arr, Zt_arr, GZt_arr, LZt_arr, order) if with_tape else None
    return Y, J, LAP, tape


def resnet_backward(A_, W_, b_, U_, int power, tape, Ybar_, Jbar_, LAPbar_):
    """Parameter gradients from cotangents of (Y, J, LAP)."""
    Xt_arr, Ht_arr, Gt_arr, Lt_arr, Zt_arr, GZt_arr, LZt_arr, tape_order = tape
    cdef int order = tape_order
    if order < 1 and Jbar_ is not None:
        raise ValueError("tape was recorded without gradients")
    if order < 2 and LAPbar_ is not None:
        raise ValueError("tape was recorded without Laplacians")

    cdef double[:, ::1] A = np.ascontiguousarray(A_, dtype=np.float64)
    cdef double[:, :, ::1] W = np.ascontiguousarray(W_, dtype=np.float64)
    cdef double[:, ::1] U = np.ascontiguousarray(U_, dtype=np.float64)

    cdef double[:, ::1] Xt = Xt_arr
    cdef double[:, :, ::1] Ht = Ht_arr
    cdef double[:, :, :, ::1] Gt = Gt_arr if order >= 1 else np.empty((1, 1, 1, 1))
    cdef double[:, :, ::1] Lt = Lt_arr if order >= 2 else np.empty((1, 1, 1))
    cdef double[:, :, ::1] Zt = Zt_arr
    cdef double[:, :, :, ::1] GZt = GZt_arr if order >= 1 else np.empty((1, 1, 1, 1))
    cdef double[:, :, ::1] LZt = LZt_arr if order >= 2 else np.empty((1, 1, 1))

    cdef Py_ssize_t d = Xt.shape[0], n = Xt.shape[1]
    cdef Py_ssize_t w = A.shape[0], L = W.shape[0], o = U.shape[0]

    cdef bint has_y = Ybar_ is not None
    cdef bint has_j = Jbar_ is not None
    cdef bint has_p = LAPbar_ is not None

    Ybt_arr = np.ascontiguousarray(np.asarray(Ybar_, dtype=np.float64).T) if has_y else None
    Jbt_arr = (
        np.ascontiguousarray(np.moveaxis(np.asarray(Jbar_, dtype=np.float64), 0, 2))
        if has_j
        else None
    )
    Pbt_arr = np.ascontiguousarray(np.asarray(LAPbar_, dtype=np.float64).T) if has_p else None
    cdef double[:, ::1] Ybt = Ybt_arr if has_y else np.empty((1, 1))
    cdef double[:, :, ::1] Jbt = Jbt_arr if has_j else np.empty((1, 1, 1))
    cdef double[:, ::1] Pbt = Pbt_arr if has_p else np.empty((1, 1))

    Abar_arr = np.zeros((w, d))
    Wbar_arr = np.zeros((L, w, w))
    bbar_arr = np.zeros((L, w))
    Ubar_arr = np.zeros((o, w))
    cdef double[:, ::1] Abar = Abar_arr
    cdef double[:, :, ::1] Wbar = Wbar_arr
    cdef double[:, ::1] bbar = bbar_arr
    cdef double[:, ::1] Ubar = Ubar_arr

    Hbar_arr = np.zeros((w, n))
    cdef double[:, ::1] Hbar = Hbar_arr
    Gbar_arr = np.zeros((d, w, n)) if order >= 1 else None
    cdef double[:, :, ::1] Gbar = Gbar_arr if order >= 1 else np.empty((1, 1, 1))
    Lbar_arr = np.zeros((w, n)) if order >= 2 else None
    cdef double[:, ::1] Lbar = Lbar_arr if order >= 2 else np.empty((1, 1))

    Zbar_arr = np.empty((w, n))
    cdef double[:, ::1] Zbar = Zbar_arr
    GZbar_arr = np.empty((d, w, n)) if order >= 1 else None
    cdef double[:, :, ::1] GZbar = GZbar_arr if order >= 1 else np.empty((1, 1, 1))
    LZbar_arr = np.empty((w, n)) if order >= 2 else None
    cdef double[:, ::1] LZbar = LZbar_arr if order >= 2 else np.empty((1, 1))

    S1_arr = np.empty((w, n))
    S2_arr = np.empty((w, n))
    S3_arr = np.empty((w, n))
    Q_arr = np.empty((w, n)) if order >= 2 else None
    cdef double[:, ::1] S1 = S1_arr
    cdef double[:, ::1] S2 = S2_arr
    cdef double[:, ::1] S3 = S3_arr
    cdef double[:, ::1] Q = Q_arr if order >= 2 else np.empty((1, 1))

    cdef Py_ssize_t l, j, i, k, pt, a
    cdef double z
    cdef double* row
    cdef double* src

    with nogil:
        # Seed the chains with head cotangents and fill the head gradient.
        if has_y:
            _red_rows(&Ybt[0, 0], n, &Ht[L, 0, 0], n, &Ubar[0, 0], w, o, w, n)
            _mm_acc(&U[0, 0], 1, w, &Ybt[0, 0], n, &Hbar[0, 0], n, w, o, n)
        if has_j:
            for k in range(d):
                _red_rows(&Jbt[k, 0, 0], n, &Gt[L, k, 0, 0], n, &Ubar[0, 0], w, o, w, n)
                _mm_acc(&U[0, 0], 1, w, &Jbt[k, 0, 0], n, &Gbar[k, 0, 0], n, w, o, n)
        if has_p:
            _red_rows(&Pbt[0, 0], n, &Lt[L, 0, 0], n, &Ubar[0, 0], w, o, w, n)
            _mm_acc(&U[0, 0], 1, w, &Pbt[0, 0], n, &Lbar[0, 0], n, w, o, n)

        for l in range(L - 1, -1, -1):
            if order == 0:
                for j in range(w):
                    row = &Zt[l, j, 0]
                    for pt in range(n):
                        z = row[pt]
                        S1[j, pt] = ((2.0 * z) if power == 2 else (3.0 * z * z)) if z > 0.0 else 0.0
            else:
                for j in range(w):
                    row = &Zt[l, j, 0]
                    for pt in range(n):
                        z = row[pt]
                        if z > 0.0:
                            if power == 2:
                                S1[j, pt] = 2.0 * z
                                S2[j, pt] = 2.0
                                S3[j, pt] = 0.0
                            else:
                                S1[j, pt] = 3.0 * z * z
                                S2[j, pt] = 6.0 * z
                                S3[j, pt] = 6.0
                        else:
                            S1[j, pt] = 0.0
                            S2[j, pt] = 0.0
                            S3[j, pt] = 0.0
            # Third-derivative term only exists for ReCU.
            if order >= 2 and power == 3:
                for j in range(w):
                    row = &Q[j, 0]
                    for pt in range(n):
                        row[pt] = 0.0
                for k in range(d):
                    for j in range(w):
                        src = &GZt[l, k, j, 0]
                        row = &Q[j, 0]
                        for pt in range(n):
                            row[pt] += src[pt] * src[pt]

            # Cotangent of the pre-activation, value and Laplacian parts.
            for j in range(w):
                row = &Zbar[j, 0]
                for pt in range(n):
                    row[pt] = Hbar[j, pt] * S1[j, pt]
            if order >= 2:
                if power == 3:
                    for j in range(w):
                        row = &Zbar[j, 0]
                        for pt in range(n):
                            row[pt] += Lbar[j, pt] * (
                                S3[j, pt] * Q[j, pt] + S2[j, pt] * LZt[l, j, pt]
                            )
                else:
                    for j in range(w):
                        row = &Zbar[j, 0]
                        for pt in range(n):
                            row[pt] += Lbar[j, pt] * S2[j, pt] * LZt[l, j, pt]

            # Gradient chain: one pass per coordinate feeds both the Zbar
            # correction and the jet cotangent.
            if order >= 1:
                for k in range(d):
                    for j in range(w):
                        row = &GZbar[k, j, 0]
                        src = &GZt[l, k, j, 0]
                        if order >= 2:
                            for pt in range(n):
                                z = Gbar[k, j, pt]
                                Zbar[j, pt] += S2[j, pt] * z * src[pt]
                                row[pt] = z * S1[j, pt] + 2.0 * Lbar[j, pt] * S2[j, pt] * src[pt]
                        else:
                            for pt in range(n):
                                z = Gbar[k, j, pt]
                                Zbar[j, pt] += S2[j, pt] * z * src[pt]
                                row[pt] = z * S1[j, pt]
            if order >= 2:
                for j in range(w):
                    row = &LZbar[j, 0]
                    for pt in range(n):
                        row[pt] = Lbar[j, pt] * S1[j, pt]

            # Parameter gradients of this block.
            _red_rows(&Zbar[0, 0], n, &Ht[l, 0, 0], n, &Wbar[l, 0, 0], w, w, w, n)
            if order >= 1:
                for k in range(d):
                    _red_rows(&GZbar[k, 0, 0], n, &Gt[l, k, 0, 0], n, &Wbar[l, 0, 0], w, w, w, n)
            if order >= 2:
                _red_rows(&LZbar[0, 0], n, &Lt[l, 0, 0], n, &Wbar[l, 0, 0], w, w, w, n)
            for j in range(w):
                bbar[l, j] = _asum(&Zbar[j, 0], n)

            # Push the chains through the linear maps; the residual branch
            # passes the existing cotangents through unchanged.
            _mm_acc(&W[l, 0, 0], 1, w, &Zbar[0, 0], n, &Hbar[0, 0], n, w, w, n)
            if order >= 1:
                for k in range(d):
                    _mm_acc(&W[l, 0, 0], 1, w, &GZbar[k, 0, 0], n, &Gbar[k, 0, 0], n, w, w, n)
            if order >= 2:
                _mm_acc(&W[l, 0, 0], 1, w, &LZbar[0, 0], n, &Lbar[0, 0], n, w, w, n)

        # Lift gradients.
        _red_rows(&Hbar[0, 0], n, &Xt[0, 0], n, &Abar[0, 0], d, w, d, n)
        if order >= 1:
            for k in range(d):
                for i in range(w):
                    Abar[i, k] += _asum(&Gbar[k, i, 0], n)

    return Abar_arr, Wbar_arr, bbar_arr, Ubar_arr
