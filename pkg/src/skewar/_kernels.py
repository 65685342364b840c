"""Hot loops for both identifiers.

Everything here is numba-compatible numpy; ``_accel.jit`` decides whether it
gets compiled. The few helpers whose fast numba form is an explicit loop
have a vectorized twin for the numpy path.

The coefficient covariance travels as a lower-triangular factor ``SP`` with
``P = SP SP^T``. AR data with roots near the unit circle produce regressors
of order 1e8, which squeeze some posterior variances down to ~1e-17 while
others stay O(1); the subtractive covariance update cannot represent that
and goes indefinite. In factor form the Kalman step and every truncation
step are applied as Joseph-type products plus appended noise columns, then
re-triangularized by Householder QR, so ``P`` stays PSD by construction.

Inside the VB loop nothing of size n_ar x n_ar is touched. The noise update
only needs moments of the fitted measurement ``C x + D u``, and those follow
from the innovation covariance ``S`` and the measurement noise alone, so
they cost O(n_z^3) and do not suffer cancellation when the regressors are
huge. The factor of ``P_post`` is built once, after the last iteration.

Status codes: 0 ok, 1 innovation covariance S not PD, 2 V update not PD,
3 Psi lost PD, 4 non-positive variance in the truncation, 5 factor of P
singular or non-finite.
"""

import math

import numpy as np

from ._accel import USE_NUMBA, jit

OK = 0
FAIL_S = 1
FAIL_V = 2
FAIL_PSI = 3
FAIL_TRUNC = 4
FAIL_P = 5

STATUS_QUANTITY = {FAIL_S: "S", FAIL_V: "V", FAIL_PSI: "Psi", FAIL_TRUNC: "truncation", FAIL_P: "P"}

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
TAIL_CUTOFF = 8.0
_SERIES_TERMS = 20


@jit
def trunc_moments(m, s2):
    """Mean and variance of N(m, s2) restricted to [0, inf).

    Returns ``(m_plus, v_plus)``. For standardized bound ``alpha = -m/sd``
    above 8 an asymptotic Mills-ratio series replaces the direct ratio; below
    -8 the constraint is treated as inactive.
    """
    sd = math.sqrt(s2)
    alpha = -m / sd
    if alpha < -TAIL_CUTOFF:
        return m, s2
    if alpha > TAIL_CUTOFF:
        # Mills ratio r = S1 / alpha; lambda - alpha = S2 / (alpha S1);
        # v / s2 = (S1^2 - S2) / S1^2, series in t = 1 / alpha^2
        t = 1.0 / (alpha * alpha)
        s1 = 0.0
        s2_series = 0.0
        term1 = 1.0
        term2 = 1.0
        for k in range(_SERIES_TERMS):
            s1 += term1
            s2_series += term2
            term1 *= -(2.0 * k + 1.0) * t
            term2 *= -(2.0 * k + 3.0) * t
        m_plus = sd * s2_series / (alpha * s1)
        v_plus = s2 * (s1 * s1 - s2_series) / (s1 * s1)
        return m_plus, v_plus
    tail = 0.5 * math.erfc(alpha / math.sqrt(2.0))
    lam = INV_SQRT_2PI * math.exp(-0.5 * alpha * alpha) / tail
    m_plus = m + sd * lam
    v_plus = s2 * (1.0 - lam * (lam - alpha))
    return m_plus, v_plus


if USE_NUMBA:

    @jit
    def _chol(A):
        n = A.shape[0]
        L = np.zeros((n, n))
        for j in range(n):
            d = A[j, j]
            for k in range(j):
                d -= L[j, k] * L[j, k]
            if not d > 0.0:
                return L, False
            L[j, j] = math.sqrt(d)
            for i in range(j + 1, n):
                acc = A[i, j]
                for k in range(j):
                    acc -= L[i, k] * L[j, k]
                L[i, j] = acc / L[j, j]
        return L, True

    @jit
    def _mm(A, B):
        n, k = A.shape
        p = B.shape[1]
        out = np.zeros((n, p))
        for i in range(n):
            for l in range(k):
                a = A[i, l]
                for j in range(p):
                    out[i, j] += a * B[l, j]
        return out

    @jit
    def _mv(A, x):
        n, k = A.shape
        out = np.zeros(n)
        for i in range(n):
            acc = 0.0
            for l in range(k):
                acc += A[i, l] * x[l]
            out[i] = acc
        return out

    @jit
    def _vm(x, A):
        k, p = A.shape
        out = np.zeros(p)
        for l in range(k):
            a = x[l]
            for j in range(p):
                out[j] += a * A[l, j]
        return out

    @jit
    def _outer(a, b):
        out = np.empty((a.shape[0], b.shape[0]))
        for i in range(a.shape[0]):
            for j in range(b.shape[0]):
                out[i, j] = a[i] * b[j]
        return out

    @jit
    def _forward(L, B):
        """Solve ``L X = B`` for lower-triangular ``L``; ``B`` is (m, k)."""
        m, p = B.shape
        X = np.empty((m, p))
        for i in range(m):
            inv = 1.0 / L[i, i]
            for c in range(p):
                acc = B[i, c]
                for j in range(i):
                    acc -= L[i, j] * X[j, c]
                X[i, c] = acc * inv
        return X

    @jit
    def _backward_t(L, B):
        """Solve ``L^T X = B`` for lower-triangular ``L``; ``B`` is (m, k)."""
        m, p = B.shape
        X = np.empty((m, p))
        for i in range(m - 1, -1, -1):
            inv = 1.0 / L[i, i]
            for c in range(p):
                acc = B[i, c]
                for j in range(i + 1, m):
                    acc -= L[j, i] * X[j, c]
                X[i, c] = acc * inv
        return X

    @jit
    def tria(A):
        """Lower-triangular ``L`` with ``L L^T = A A^T`` (Householder LQ of ``A``)."""
        n, p = A.shape
        M = A.copy()
        v = np.empty(p)
        for j in range(min(n, p)):
            norm2 = 0.0
            for i in range(j, p):
                norm2 += M[j, i] * M[j, i]
            if norm2 == 0.0:
                continue
            norm = math.sqrt(norm2)
            alpha = -norm if M[j, j] >= 0.0 else norm
            for i in range(j, p):
                v[i] = M[j, i]
            v[j] -= alpha
            vnorm2 = norm2 - M[j, j] * M[j, j] + v[j] * v[j]
            if vnorm2 == 0.0:
                continue
            scale = 2.0 / vnorm2
            for r in range(j, n):
                dot = 0.0
                for i in range(j, p):
                    dot += M[r, i] * v[i]
                dot *= scale
                for i in range(j, p):
                    M[r, i] -= dot * v[i]
        L = np.zeros((n, n))
        for i in range(n):
            for j in range(min(i + 1, p)):
                L[i, j] = M[i, j]
        return L

else:

    def _chol(A):
        try:
            return np.linalg.cholesky(A), True
        except np.linalg.LinAlgError:
            return np.zeros_like(A), False

    def _mm(A, B):
        return A @ B

    def _mv(A, x):
        return A @ x

    def _vm(x, A):
        return x @ A

    _outer = np.outer

    def _forward(L, B):
        """Solve ``L X = B`` for lower-triangular ``L``; ``B`` is (m, k)."""
        X = np.empty(B.shape)
        for i in range(L.shape[0]):
            X[i] = (B[i] - L[i, :i] @ X[:i]) / L[i, i]
        return X

    def _backward_t(L, B):
        """Solve ``L^T X = B`` for lower-triangular ``L``; ``B`` is (m, k)."""
        X = np.empty(B.shape)
        for i in range(L.shape[0] - 1, -1, -1):
            X[i] = (B[i] - L[i + 1:, i] @ X[i + 1:]) / L[i, i]
        return X

    def tria(A):
        """Lower-triangular ``L`` with ``L L^T = A A^T`` (Householder QR of ``A^T``)."""
        n, p = A.shape
        R = np.linalg.qr(A.T, mode="r")
        L = np.zeros((n, n))
        k = min(n, p)
        L[:, :k] = R[:k].T
        return L


@jit
def _sym(A):
    return 0.5 * (A + A.T)


@jit
def _forward_vec(L, b):
    x = np.empty_like(b)
    for i in range(L.shape[0]):
        acc = b[i]
        for j in range(i):
            acc -= L[i, j] * x[j]
        x[i] = acc / L[i, i]
    return x


@jit
def _spd_inv(A):
    """Inverse of an SPD matrix through its Cholesky factor."""
    L, ok = _chol(A)
    if not ok:
        return L, False
    Li = _forward(L, np.eye(A.shape[0]))
    return _mm(Li.T, Li), True


@jit
def factor_ok(SP):
    """A triangular factor defines an SPD matrix iff its diagonal is nonzero."""
    for i in range(SP.shape[0]):
        d = SP[i, i]
        if not (d != 0.0 and math.isfinite(d)):
            return False
        for j in range(SP.shape[1]):
            if not math.isfinite(SP[i, j]):
                return False
    return True


@jit
def gram(SP):
    """``SP SP^T``."""
    return _mm(SP, np.ascontiguousarray(SP.T))


@jit
def gram_diag(SP):
    n, p = SP.shape
    out = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for j in range(p):
            acc += SP[i, j] * SP[i, j]
        out[i] = acc
    return out


@jit
def skew_step(x, SP, D0, V0, Psi0, nu0, z, C, iters, tol):
    """One measurement update of the skew-normal VB identifier.

    Inputs are the predictive mean ``x``, the factor ``SP`` of the predictive
    covariance and the MVNIW parameters ``(D0, V0, Psi0, nu0)``. Returns

        (x, SP, D, V, Psi, nu, u_mean, U, Upsilon, n_iter, status, fail_iter)

    where ``u_mean``, ``U`` and ``Upsilon`` describe the truncated skewness
    variable from the final iteration.
    """
    n = x.shape[0]
    m = z.shape[0]
    N = n + m
    s = SQRT_2_OVER_PI
    nu = nu0 + 1.0
    eye_m = np.eye(m)
    ones_m = np.ones(m)
    Ct = np.ascontiguousarray(C.T)

    CS = _mm(C, SP)
    CP = _mm(CS, np.ascontiguousarray(SP.T))  # (P C^T)^T
    CPC = _sym(_mm(CS, np.ascontiguousarray(CS.T)))
    r0 = z - _mv(C, x)

    D = D0.copy()
    V = V0.copy()
    Psi = Psi0.copy()
    xi_x = x.copy()
    xi_u = np.zeros(m)
    U = np.zeros((m, m))
    UpsT = np.zeros((m, n))

    V0_inv, ok = _spd_inv(V0)
    if not ok:
        return x, SP, D0, V0, Psi0, nu, xi_u, U, np.zeros((n, m)), 0, FAIL_V, 0
    DVi = _mm(D0, V0_inv)

    v_plus_all = np.zeros(m)
    prev = np.zeros(N)
    # Kalman-step ingredients of the latest iteration, reused for the factor
    A_k = eye_m.copy()
    D_k = D0.copy()
    R_k = eye_m.copy()
    L_k = eye_m.copy()
    WxT = np.zeros((m, n))
    WuT = np.zeros((m, m))

    status = OK
    fail_iter = -1
    n_iter = 0
    for it in range(iters):
        R_hat = Psi / (nu - m - 1.0)
        A, ok = _spd_inv(eye_m + m * V)
        if not ok:
            status = FAIL_V
            fail_iter = it
            break
        A = _sym(A)
        u0 = (m * s) * _mv(A, _mv(V, ones_m))
        DA = _mm(D, A)  # (A D^T)^T
        S = _sym(CPC + _mm(DA, np.ascontiguousarray(D.T)) + R_hat)
        L, ok = _chol(S)
        if not ok:
            status = FAIL_S
            fail_iter = it
            break
        innov = r0 - _mv(D, u0 - s)
        # W^T = L^{-1} (Xi Ct~^T)^T, so Xi_hat = blockdiag(P, A) - W W^T
        WxT = _forward(L, CP)
        WuT = _forward(L, DA)
        a = _forward_vec(L, innov)
        xi_x = x + _vm(a, WxT)
        xi_u = u0 + _vm(a, WuT)
        UpsT = -_mm(np.ascontiguousarray(WuT.T), WxT)
        U = A - _mm(np.ascontiguousarray(WuT.T), WuT)
        A_k = A
        D_k = D
        R_k = R_hat
        L_k = L
        # Moments of the fitted measurement C x + D u: with M = S - R_hat,
        # Ct~ Xi_hat Ct~^T = R_hat S^-1 M and Ct~ Xi_hat = R_hat S^-1 Ct~ Xi.
        # Both stay O(R_hat) however large the regressors are, unlike the
        # direct differences of O(|C|^2) terms.
        F = _forward(L, R_hat)
        T = _sym(R_hat - _mm(np.ascontiguousarray(F.T), F))
        Y = _mm(R_hat, _backward_t(L, WuT))
        eps = _mv(R_hat, _backward_t(L, a.reshape((m, 1)))[:, 0])

        for j in range(m):
            v_j = U[j, j]
            if not v_j > 0.0:
                status = FAIL_TRUNC
                break
            m_j = xi_u[j]
            m_plus, v_plus = trunc_moments(m_j, v_j)
            c_x = UpsT[j].copy()
            c_u = U[:, j].copy()
            y = Y[:, j].copy()
            dm = (m_plus - m_j) / v_j
            beta = (v_plus - v_j) / (v_j * v_j)
            xi_x = xi_x + dm * c_x
            xi_u = xi_u + dm * c_u
            UpsT = UpsT + beta * _outer(c_u, c_x)
            U = U + beta * _outer(c_u, c_u)
            eps = eps - dm * y
            T = T + beta * _outer(y, y)
            Y = Y + beta * _outer(y, c_u)
            v_plus_all[j] = v_plus
        if status != OK:
            fail_iter = it
            break
        U = _sym(U)

        u_til = xi_u - s
        r = eps + _mv(D_k, u_til)  # z - C xi_x
        C_Ups = Y - _mm(D_k, U)
        V_inv = _sym(U + _outer(u_til, u_til) + V0_inv)
        V, ok = _spd_inv(V_inv)
        if not ok:
            status = FAIL_V
            fail_iter = it
            break
        V = _sym(V)
        D = _mm(_outer(r, u_til) - C_Ups + DVi, V)
        # Psi0 + (D - D0) V0^-1 (D - D0)^T + E[(e - D u~)(e - D u~)^T], a sum
        # of PSD terms equal to the textbook Psi0 + D0 V0^-1 D0^T + E[e e^T] - D V^-1 D^T
        dD = D - D_k
        dDt = np.ascontiguousarray(dD.T)
        E0 = D - D0
        res = eps - _mv(dD, u_til)
        cov = T + _mm(Y, dDt) + _mm(dD, np.ascontiguousarray(Y.T)) + _mm(_mm(dD, U), dDt)
        Psi = _sym(Psi0 + _mm(_mm(E0, V0_inv), np.ascontiguousarray(E0.T)) + _outer(res, res) + cov)
        Lp, ok = _chol(Psi)
        if not ok:
            status = FAIL_PSI
            fail_iter = it
            break
        n_iter = it + 1

        if tol > 0.0:
            cur = np.concatenate((xi_x, xi_u))
            if it > 0:
                change = np.sqrt(np.sum((cur - prev) ** 2))
                if change <= tol * np.sqrt(np.sum(cur**2)):
                    break
            prev = cur

    if status != OK:
        return (x, SP, D0, V0, Psi0, nu, xi_u, U, np.ascontiguousarray(UpsT.T),
                n_iter, status, fail_iter)

    # Factor of the joint posterior covariance: X = [(I - K Ct~) L_Xi, K L_R],
    # then one Joseph-type step per truncated coordinate.
    LA, ok = _chol(A_k)
    LR, ok2 = _chol(R_k)
    if not (ok and ok2):
        return (x, SP, D0, V0, Psi0, nu, xi_u, U, np.ascontiguousarray(UpsT.T),
                n_iter, FAIL_S, n_iter - 1)
    WT = np.zeros((m, N))
    WT[:, :n] = WxT
    WT[:, n:] = WuT
    KtT = np.ascontiguousarray(_backward_t(L_k, WT).T)  # K, shape (N, m)
    CL = np.zeros((m, N))
    CL[:, :n] = CS
    CL[:, n:] = _mm(D_k, LA)
    X = np.zeros((N, N + 2 * m))
    X[:n, :n] = SP
    X[n:, n:N] = LA
    X[:, :N] -= _mm(KtT, CL)
    X[:, N:N + m] = _mm(KtT, LR)
    for j in range(m):
        row = X[n + j].copy()
        col = _mv(X, row)
        s2 = col[n + j]
        if not s2 > 0.0:
            return (x, SP, D0, V0, Psi0, nu, xi_u, U, np.ascontiguousarray(UpsT.T),
                    n_iter, FAIL_TRUNC, n_iter - 1)
        g = col / s2
        X -= _outer(g, row)
        X[:, N + m + j] = math.sqrt(v_plus_all[j]) * g
    SP_post = tria(np.ascontiguousarray(X[:n]))
    return xi_x, SP_post, D, V, Psi, nu, xi_u, U, np.ascontiguousarray(UpsT.T), n_iter, status, fail_iter


@jit
def gauss_step(x, SP, Psi0, nu0, z, C, iters, tol):
    """One measurement update of the normal-innovation VB baseline.

    Returns ``(x, SP, Psi, nu, n_iter, status, fail_iter)``.
    """
    n = x.shape[0]
    m = z.shape[0]
    nu = nu0 + 1.0
    Ct = np.ascontiguousarray(C.T)
    CS = _mm(C, SP)
    CP = _mm(CS, np.ascontiguousarray(SP.T))
    CPC = _sym(_mm(CS, np.ascontiguousarray(CS.T)))
    r0 = z - _mv(C, x)

    Psi = Psi0.copy()
    x_post = x.copy()
    WxT = np.zeros((m, n))
    L_k = np.eye(m)
    R_k = np.eye(m)
    status = OK
    fail_iter = -1
    n_iter = 0
    prev = x.copy()
    for it in range(iters):
        R_hat = Psi / (nu - m - 1.0)
        S = _sym(CPC + R_hat)
        L, ok = _chol(S)
        if not ok:
            status = FAIL_S
            fail_iter = it
            break
        WxT = _forward(L, CP)
        a = _forward_vec(L, r0)
        x_post = x + _vm(a, WxT)
        L_k = L
        R_k = R_hat
        F = _forward(L, R_hat)
        T = _sym(R_hat - _mm(np.ascontiguousarray(F.T), F))  # C P_post C^T
        r = _mv(R_hat, _backward_t(L, a.reshape((m, 1)))[:, 0])  # z - C x_post
        Psi = _sym(Psi0 + _outer(r, r) + T)
        Lp, ok = _chol(Psi)
        if not ok:
            status = FAIL_PSI
            fail_iter = it
            break
        n_iter = it + 1
        if tol > 0.0:
            if it > 0:
                change = np.sqrt(np.sum((x_post - prev) ** 2))
                if change <= tol * np.sqrt(np.sum(x_post**2)):
                    break
            prev = x_post.copy()
    if status != OK:
        return x, SP, Psi0, nu, n_iter, status, fail_iter
    LR, ok = _chol(R_k)
    if not ok:
        return x, SP, Psi0, nu, n_iter, FAIL_S, n_iter - 1
    KtT = np.ascontiguousarray(_backward_t(L_k, WxT).T)
    X = np.zeros((n, n + m))
    X[:, :n] = SP - _mm(KtT, CS)
    X[:, n:] = _mm(KtT, LR)
    return x_post, tria(X), Psi, nu, n_iter, status, fail_iter


@jit
def fill_regressor(C, zs, k):
    """Column j of ``C`` becomes ``zs[k-1-j]``, zero before the first sample."""
    n = C.shape[1]
    for j in range(n):
        idx = k - 1 - j
        if idx >= 0:
            C[:, j] = zs[idx]
        else:
            C[:, j] = 0.0


@jit
def predict_factor(SP_post, gamma, adaptive, FQ, LK):
    """Factor of ``P_post + Q``.

    ``Q`` is adaptive, ``q LK LK^T`` with ``q = (1/gamma - 1) max(diag P_post)``,
    or fixed, ``FQ FQ^T``.
    """
    n = SP_post.shape[0]
    if adaptive:
        q = (1.0 / gamma - 1.0) * np.max(gram_diag(SP_post))
        if q == 0.0:
            return SP_post.copy()
        F = math.sqrt(q) * LK
    else:
        F = FQ
    X = np.zeros((n, n + F.shape[1]))
    X[:, :n] = SP_post
    X[:, n:] = F
    return tria(X)


@jit
def skew_run(zs, start, x0, SP0, D0, V0, Psi0, nu0, gamma, adaptive, FQ, LK, iters, tol, store_P, check_P):
    """Filter ``zs[start:]`` with the skew-normal identifier.

    Rows before ``start`` only feed the regressor. Records posterior (k|k)
    quantities per step, and returns the predictive state after the last
    step so a run can be resumed.
    """
    K, m = zs.shape
    K = K - start
    n = x0.shape[0]
    xs = np.zeros((K, n))
    p_diag = np.zeros((K, n))
    Ps = np.zeros((K if store_P else 0, n, n))
    Ds = np.zeros((K, m, m))
    Vs = np.zeros((K, m, m))
    Psis = np.zeros((K, m, m))
    nus = np.zeros(K)
    iters_used = np.zeros(K, dtype=np.int64)

    x = x0.copy()
    SP = SP0.copy()
    D = D0.copy()
    V = V0.copy()
    Psi = Psi0.copy()
    nu = nu0
    C = np.zeros((m, n))
    status = OK
    fail_step = -1
    fail_iter = -1
    done = 0
    for k in range(K):
        fill_regressor(C, zs, start + k)
        x_p, SP_p, D_p, V_p, Psi_p, nu_p, u_m, U, Ups, n_it, st, f_it = skew_step(
            x, SP, D, V, Psi, nu, zs[start + k], C, iters, tol
        )
        if st == OK and check_P and not factor_ok(SP_p):
            st = FAIL_P
        if st != OK:
            status = st
            fail_step = k
            fail_iter = f_it
            break
        xs[k] = x_p
        p_diag[k] = gram_diag(SP_p)
        if store_P:
            Ps[k] = gram(SP_p)
        Ds[k] = D_p
        Vs[k] = V_p
        Psis[k] = Psi_p
        nus[k] = nu_p
        iters_used[k] = n_it
        done = k + 1

        x = x_p
        SP = predict_factor(SP_p, gamma, adaptive, FQ, LK)
        D = D_p
        V = V_p / gamma
        Psi = gamma * Psi_p
        nu = 2.0 * m + gamma * (nu_p - 2.0 * m)
    return (xs, p_diag, Ps, Ds, Vs, Psis, nus, iters_used, done, status, fail_step, fail_iter,
            x, SP, D, V, Psi, nu)


@jit
def gauss_run(zs, start, x0, SP0, Psi0, nu0, gamma, adaptive, FQ, LK, iters, tol, store_P, check_P):
    """Driver for the baseline, same conventions as :func:`skew_run`; ``nu``
    forgets toward ``n_z + 1``."""
    K, m = zs.shape
    K = K - start
    n = x0.shape[0]
    xs = np.zeros((K, n))
    p_diag = np.zeros((K, n))
    Ps = np.zeros((K if store_P else 0, n, n))
    Psis = np.zeros((K, m, m))
    nus = np.zeros(K)
    iters_used = np.zeros(K, dtype=np.int64)

    x = x0.copy()
    SP = SP0.copy()
    Psi = Psi0.copy()
    nu = nu0
    C = np.zeros((m, n))
    status = OK
    fail_step = -1
    fail_iter = -1
    done = 0
    floor = m + 1.0
    for k in range(K):
        fill_regressor(C, zs, start + k)
        x_p, SP_p, Psi_p, nu_p, n_it, st, f_it = gauss_step(x, SP, Psi, nu, zs[start + k], C, iters, tol)
        if st == OK and check_P and not factor_ok(SP_p):
            st = FAIL_P
        if st != OK:
            status = st
            fail_step = k
            fail_iter = f_it
            break
        xs[k] = x_p
        p_diag[k] = gram_diag(SP_p)
        if store_P:
            Ps[k] = gram(SP_p)
        Psis[k] = Psi_p
        nus[k] = nu_p
        iters_used[k] = n_it
        done = k + 1

        x = x_p
        SP = predict_factor(SP_p, gamma, adaptive, FQ, LK)
        Psi = gamma * Psi_p
        nu = floor + gamma * (nu_p - floor)
    return xs, p_diag, Ps, Psis, nus, iters_used, done, status, fail_step, fail_iter, x, SP, Psi, nu
