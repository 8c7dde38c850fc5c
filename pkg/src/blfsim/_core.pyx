# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled integration core for the built-in third-order benchmark.

Every arithmetic expression here mirrors the pure Python engine line for
line (same operand order, same libm calls, no contracted multiply-adds), so
both engines produce bit-identical trajectories.  Keep the two in sync: any
formula change in plant.py / constraints.py / control_law.py /
approximator.py / observer.py for the benchmark path must be transcribed
here verbatim.

State layout (n=3, l nodes per network):
  y[0:3]   plant states
  y[3:6]   Nussbaum arguments
  y[6:9]   observer auxiliaries
  y[9:12]  input filters
  y[12:]   weights, three blocks of l

Cascade scratch vector cs:
  0 u, 1 yd, 2+ z(3), 5+ psi(3), 8+ Psi(3), 11+ L(3), 14+ Q(3),
  17+ eps_hat(3), 20+ nn(3), 23+ drift(3), 26+ alpha(3), 29+ theta(2),
  31+ beta_x_next(3)
"""

from libc.math cimport atan, cos, exp, fabs, isfinite, log, nextafter, pow, sin, sqrt, tanh, M_PI

cdef enum:
    CU = 0
    CYD = 1
    CZ = 2
    CPSI = 5
    CPSIC = 8
    CL = 11
    CQ = 14
    CEPS = 17
    CNN = 20
    CDRIFT = 23
    CALPHA = 26
    CTHETA = 29
    CBX = 31

# status codes shared with _compiled.py
cdef enum:
    OK = 0
    TUBE = 1
    SVIC = 2
    BARRIER = 3
    NONFINITE_CTRL = 4
    CEIL_CTRL = 5
    NONFINITE_STATE = 6
    CEIL_STATE = 7


cdef inline double _yd(double t):
    return 0.5 * cos(M_PI * t) + 0.5 * sin(0.5 * M_PI * t)


cdef inline double _Psi(int i, double[::1] y, double t):
    if i == 0:
        return exp(-0.2 * y[0]) + exp(-3.0 * t)
    elif i == 1:
        return exp(-0.2 * y[1]) + exp(-3.0 * t) + 2.0 * cos(0.5 * y[0])
    return exp(-3.0 * t) + 2.0 * cos(0.5 * y[0])


cdef inline double _dPsi_dt(double t):
    return -3.0 * exp(-3.0 * t)


cdef inline double _saturate(double v, double A):
    cdef double r = (2.0 * A / M_PI) * atan(M_PI * v / (2.0 * A))
    if r >= A:
        r = nextafter(A, 0.0)
    elif r <= -A:
        r = -nextafter(A, 0.0)
    return r


cdef int _cascade(double t, double[::1] y, int l,
                  double[::1] kk, double[::1] keps,
                  double[::1] A, double[::1] beta,
                  double rho, double mu_bar, double width,
                  double[:, ::1] c1, double[:, ::1] c2, double[:, ::1] c3,
                  double[:, ::1] phi, double[::1] cs, double[::1] vio):
    cdef int i, j, m, dim
    cdef double Psi_i, psi_i, z_i, den, L_i, Q_i, dpsidt_i
    cdef double ss, dv, nn_i, eps_i, drift_i, c_i, a_i
    cdef double Nz, v1, v2, p, p2, disc, root, den2, num, s1, s2
    cdef double theta_prev, u
    cdef double[:, ::1] cen

    cs[CYD] = _yd(t)
    theta_prev = cs[CYD]
    u = 0.0

    for i in range(3):
        Psi_i = _Psi(i, y, t)
        psi_i = Psi_i - A[i]
        if psi_i <= 0.0:
            vio[0] = i + 1; vio[1] = psi_i; vio[2] = 0.0; vio[3] = t
            return TUBE
        if fabs(y[i]) >= Psi_i:
            vio[0] = i + 1; vio[1] = y[i]; vio[2] = Psi_i; vio[3] = t
            return SVIC
        z_i = y[i] - theta_prev
        if fabs(z_i) >= psi_i:
            vio[0] = i + 1; vio[1] = z_i; vio[2] = psi_i; vio[3] = t
            return BARRIER

        den = psi_i * psi_i - z_i * z_i
        L_i = 0.5 * log(psi_i * psi_i / den)
        Q_i = z_i / den
        dpsidt_i = _dPsi_dt(t)

        if i == 0:
            cen = c1
        elif i == 1:
            cen = c2
        else:
            cen = c3
        dim = i + 2
        nn_i = 0.0
        for m in range(l):
            ss = 0.0
            for j in range(dim - 1):
                dv = y[j] - cen[m, j]
                ss += dv * dv
            dv = y[9 + i] - cen[m, dim - 1]
            ss += dv * dv
            phi[i, m] = exp(-ss / width)
            nn_i += y[12 + i * l + m] * phi[i, m]

        eps_i = y[6 + i] + keps[i] * L_i
        drift_i = Q_i * (z_i / psi_i) * dpsidt_i
        c_i = 0.5 if i == 2 else 0.75
        a_i = (
            kk[i] * Q_i * z_i
            + nn_i
            + eps_i
            + pow(keps[i], 4.0) / 8.0
            + c_i
            - Q_i * (z_i / psi_i) * dpsidt_i
        )
        if not isfinite(a_i):
            vio[0] = i + 1; vio[1] = a_i; vio[2] = 0.0; vio[3] = t
            return NONFINITE_CTRL

        cs[CZ + i] = z_i
        cs[CPSI + i] = psi_i
        cs[CPSIC + i] = Psi_i
        cs[CL + i] = L_i
        cs[CQ + i] = Q_i
        cs[CEPS + i] = eps_i
        cs[CNN + i] = nn_i
        cs[CDRIFT + i] = drift_i
        cs[CALPHA + i] = a_i

        Nz = y[3 + i] * y[3 + i] * cos(y[3 + i])
        if i == 2:
            u = Nz * a_i
        else:
            v1 = Nz * a_i
            v2 = 0.0
            if fabs(v1) >= 1e-6:
                p = M_PI * mu_bar / (2.0 * A[i + 1])
                p2 = p * p
                disc = 1.0 - 4.0 * p2 * v1 * v1
                if disc >= 0.0:
                    root = sqrt(disc)
                    den2 = 2.0 * p2 * v1
                    num = 1.0 - 2.0 * p2 * v1 * v1
                    s1 = (num - root) / den2
                    s2 = (num + root) / den2
                    v2 = beta[i] * (s1 + rho * (s2 - s1))
            theta_prev = _saturate(v1 + v2, A[i + 1])
            cs[CTHETA + i] = theta_prev

    if not isfinite(u):
        vio[0] = 0.0; vio[1] = u; vio[2] = 0.0; vio[3] = t
        return NONFINITE_CTRL
    cs[CU] = u
    cs[CBX + 0] = beta[0] * y[1]
    cs[CBX + 1] = beta[1] * y[2]
    cs[CBX + 2] = beta[2] * u
    return OK


cdef int _eval(double t, double[::1] y, double[::1] deriv, int l,
               double[::1] kk, double[::1] keps,
               double[::1] A, double[::1] beta,
               double rho, double mu_bar, double width, double tau,
               double[::1] lam, double[::1] eta,
               double[:, ::1] c1, double[:, ::1] c2, double[:, ::1] c3,
               double[:, ::1] phi, double[::1] cs, double[::1] vio):
    cdef int st, i, m
    cdef double u, nxt, f_i, d_i, g_i
    st = _cascade(t, y, l, kk, keps, A, beta, rho, mu_bar, width,
                  c1, c2, c3, phi, cs, vio)
    if st != OK:
        return st
    u = cs[CU]

    for i in range(3):
        nxt = y[i + 1] if i < 2 else u
        if i == 0:
            f_i = 0.05 * cos(y[0])
            d_i = 0.2 * sin(M_PI * y[0])
        elif i == 1:
            f_i = (1.0 - pow(2.0, y[0] * y[1])) / (1.0 + pow(2.0, y[0] * y[0])) \
                + 0.1 * tanh(nxt)
            d_i = 0.2 * sin(M_PI * y[0] * y[1])
        else:
            f_i = (
                0.2 * pow(3.0, -(y[1] * y[1]) * pow(y[2], 4.0))
                + 0.05 * exp(-(y[0] * y[0])) * nxt
                + 0.2 * cos(nxt)
            )
            d_i = 0.2 * y[1] * y[1] * sin(M_PI * y[2])
        deriv[i] = f_i + beta[i] * nxt + d_i
        deriv[3 + i] = cs[CALPHA + i]
        deriv[6 + i] = -keps[i] * (
            cs[CNN + i] + cs[CBX + i] - cs[CDRIFT + i] + cs[CEPS + i]
        )
        deriv[9 + i] = (nxt - y[9 + i]) / tau
        g_i = keps[i] * keps[i] + eta[i]
        for m in range(l):
            deriv[12 + i * l + m] = lam[i] * (phi[i, m] - g_i * y[12 + i * l + m])
    return OK


def run_b3_kernel(double[::1] y, int steps, int dec, int l,
                  double dt, double tau, double ceiling,
                  double rho, double mu_bar, double width,
                  double[::1] kk, double[::1] keps,
                  double[::1] lam, double[::1] eta,
                  double[::1] A, double[::1] beta,
                  double[:, ::1] c1, double[:, ::1] c2, double[:, ::1] c3,
                  double[:, ::1] data, double[:, ::1] theta_log,
                  double[::1] k1, double[::1] k2, double[::1] k3, double[::1] k4,
                  double[::1] ytmp, double[:, ::1] phi,
                  double[::1] cs, double[::1] vio):
    """Integrate the benchmark closed loop; returns (status, steps, rows).

    y is advanced in place.  data/theta_log receive one row per logged step;
    vio carries (loop, value, bound, t) for non-OK statuses.
    """
    cdef int kstep = 0, row = 0, st, j, i, m, col
    cdef int dim = y.shape[0]
    cdef double t_k, hh, h6, v, acc

    hh = 0.5 * dt
    h6 = dt / 6.0

    while True:
        t_k = kstep * dt
        st = _eval(t_k, y, k1, l, kk, keps, A, beta, rho, mu_bar, width, tau,
                   lam, eta, c1, c2, c3, phi, cs, vio)
        if st != OK:
            return st, kstep, row
        if fabs(cs[CU]) > ceiling:
            vio[0] = 0.0; vio[1] = cs[CU]; vio[2] = ceiling; vio[3] = t_k
            return CEIL_CTRL, kstep, row
        if kstep % dec == 0:
            col = 0
            data[row, col] = t_k; col += 1
            for i in range(3):
                data[row, col] = y[i]; col += 1
            data[row, col] = cs[CU]; col += 1
            data[row, col] = cs[CYD]; col += 1
            for i in range(3):
                data[row, col] = cs[CZ + i]; col += 1
            for i in range(3):
                data[row, col] = cs[CPSI + i]; col += 1
            for i in range(3):
                data[row, col] = cs[CPSIC + i]; col += 1
            for i in range(3):
                data[row, col] = cs[CEPS + i]; col += 1
            for i in range(3):
                data[row, col] = y[3 + i]; col += 1
            for i in range(3):
                acc = 0.0
                for m in range(l):
                    acc += y[12 + i * l + m] * y[12 + i * l + m]
                data[row, col] = sqrt(acc); col += 1
            for i in range(3):
                data[row, col] = cs[CL + i]; col += 1
            theta_log[row, 0] = cs[CTHETA + 0]
            theta_log[row, 1] = cs[CTHETA + 1]
            row += 1
        if kstep == steps:
            return OK, kstep, row

        for j in range(dim):
            ytmp[j] = y[j] + hh * k1[j]
        st = _eval(t_k + hh, ytmp, k2, l, kk, keps, A, beta, rho, mu_bar, width,
                   tau, lam, eta, c1, c2, c3, phi, cs, vio)
        if st != OK:
            return st, kstep, row
        for j in range(dim):
            ytmp[j] = y[j] + hh * k2[j]
        st = _eval(t_k + hh, ytmp, k3, l, kk, keps, A, beta, rho, mu_bar, width,
                   tau, lam, eta, c1, c2, c3, phi, cs, vio)
        if st != OK:
            return st, kstep, row
        for j in range(dim):
            ytmp[j] = y[j] + dt * k3[j]
        st = _eval(t_k + dt, ytmp, k4, l, kk, keps, A, beta, rho, mu_bar, width,
                   tau, lam, eta, c1, c2, c3, phi, cs, vio)
        if st != OK:
            return st, kstep, row
        for j in range(dim):
            y[j] = y[j] + h6 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
        for j in range(dim):
            v = y[j]
            if not isfinite(v):
                vio[0] = 0.0; vio[1] = v; vio[2] = 0.0; vio[3] = t_k + dt
                return NONFINITE_STATE, kstep, row
            if fabs(v) > ceiling:
                vio[0] = 0.0; vio[1] = v; vio[2] = ceiling; vio[3] = t_k + dt
                return CEIL_STATE, kstep, row
        kstep += 1
