"""Nopython (numba) kernels behind the movement, engine, and sampling layers.

The public modules wrap these with validated, typed interfaces; everything
here trades convenience for throughput. Gradient-field variants are encoded
as a small integer plus a parameter triple so each kernel stays monomorphic:

    FIELD_NULL    0: ()                      zero field
    FIELD_STATIC  1: (P, D, t_star)          fixed-age point source
    FIELD_LINEAR  2: (slope, 0, 0)           constant radial derivative
    FIELD_DYNAMIC 3: (P, D, 0) + drop_times  superposed aging point sources

For FIELD_DYNAMIC only the first ``n_drops`` entries of ``drop_times`` are
live, and a drop contributes only at evaluation times strictly after it
(``t_drop < t``), which both avoids the 1/(t - t_drop) singularity and fixes
start-of-step semantics: a payload released during timestep t is felt from
t + 1 on.

Random draws come from a numpy Generator passed in by the caller; one heading
draw consumes exactly one uniform, so streams stay reproducible across kernels.
"""

import math

import numpy as np
from numba import njit

FIELD_NULL = 0
FIELD_STATIC = 1
FIELD_LINEAR = 2
FIELD_DYNAMIC = 3

SQRT1_2 = 1.0 / math.sqrt(2.0)
TWO_PI = 2.0 * math.pi
# Largest representable double below pi, to keep headings in half-open [-pi, pi).
PI_OPEN = np.nextafter(np.pi, 0.0)

# Above this variance the truncated normal's CDF matches the uniform's to
# ~5e-13 (density variation over [-pi, pi) is pi^2 / (2 sigma^2)), so we draw
# uniformly instead; the inverse transform also loses u-resolution for much
# larger sigma, so this is an accuracy floor as well as a fast path.
SIGMA2_UNIFORM_CUTOFF = 1e12

# Resampling attempts allowed per timestep before declaring boundary starvation.
RESAMPLE_CAP = 10_000

EMPTY_DROPS = np.empty(0, dtype=np.float64)

EVENT_DROP_DRUG = 0
EVENT_DROP_SIGNAL = 1
EVENT_CAPPED = 2


@njit(cache=True)
def inv_norm_cdf(p):
    """Inverse standard normal CDF (Wichura's PPND16 rational approximation)."""
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r
                    + 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r
                  + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r
                + 1.3314166789178437745e2) * r + 3.3871328727963666080e0)
        den = (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r
                    + 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r
                  + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r
                + 4.2313330701600911252e1) * r + 1.0)
        return q * num / den
    if q < 0.0:
        r = p
    else:
        r = 1.0 - p
    if r <= 0.0:
        return -np.inf if q < 0.0 else np.inf
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r = r - 1.6
        num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
                    + 2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r
                  + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r
                + 4.63033784615654529590e0) * r + 1.42343711074968357734e0)
        den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
                    + 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r
                  + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r
                + 2.05319162663775882187e0) * r + 1.0)
    else:
        r = r - 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r
                  + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r
                + 5.46378491116411436990e0) * r + 6.65790464350110377720e0)
        den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
                    + 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r
                  + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r
                + 5.99832206555887937690e-1) * r + 1.0)
    val = num / den
    return -val if q < 0.0 else val


@njit(cache=True)
def norm_cdf(x):
    """Standard normal CDF, accurate into the far tails via erfc."""
    return 0.5 * math.erfc(-x * SQRT1_2)


@njit(cache=True)
def radial_derivative(kind, p0, p1, p2, drops, n_drops, phi, t):
    """d(concentration)/d(distance) at radius ``phi``, signed.

    Point-source variants are <= 0; FIELD_LINEAR returns its constant slope.
    """
    if kind == FIELD_STATIC:
        P = p0
        D = p1
        t_star = p2
        return -(P * phi / (8.0 * math.pi * D * D * t_star * t_star)) * math.exp(
            -phi * phi / (4.0 * D * t_star)
        )
    if kind == FIELD_LINEAR:
        return p0
    if kind == FIELD_DYNAMIC:
        P = p0
        D = p1
        # Per-term prefactor keeps the value an exact (left-to-right) sum of
        # single-drop evaluations, which additivity tests rely on.
        pref = -(P * phi / (8.0 * math.pi * D * D))
        acc = 0.0
        for j in range(n_drops):
            dt = t - drops[j]
            if dt > 0.0:
                acc += pref * (math.exp(-phi * phi / (4.0 * D * dt)) / (dt * dt))
        return acc
    return 0.0  # FIELD_NULL


@njit(cache=True)
def concentration_value(kind, p0, p1, p2, drops, n_drops, phi, t):
    """Concentration at radius ``phi`` (linear variant uses p2 as its offset)."""
    if kind == FIELD_STATIC:
        P = p0
        D = p1
        t_star = p2
        return (P / (4.0 * math.pi * D * t_star)) * math.exp(
            -phi * phi / (4.0 * D * t_star)
        )
    if kind == FIELD_LINEAR:
        v = p2 + p0 * phi
        return v if v > 0.0 else 0.0
    if kind == FIELD_DYNAMIC:
        P = p0
        D = p1
        pref = P / (4.0 * math.pi * D)
        acc = 0.0
        for j in range(n_drops):
            dt = t - drops[j]
            if dt > 0.0:
                acc += pref * (math.exp(-phi * phi / (4.0 * D * dt)) / dt)
        return acc
    return 0.0


@njit(cache=True)
def sigma_squared_from(kind, p0, p1, p2, drops, n_drops, phi, t, b):
    """Heading-noise variance 1/(b * |derivative|); inf when flat, 0 when b=inf."""
    d = abs(radial_derivative(kind, p0, p1, p2, drops, n_drops, phi, t))
    if d == 0.0 or b == 0.0:
        return np.inf
    q = b * d
    if q == np.inf:
        return 0.0
    return 1.0 / q


@njit(cache=True)
def sample_beta(sigma2, gen):
    """One heading-noise draw from N(0, sigma2) truncated to [-pi, pi).

    sigma2 = 0 returns 0.0 without consuming a draw; every other branch
    consumes exactly one uniform. Variances above SIGMA2_UNIFORM_CUTOFF
    (including inf) are drawn uniformly.
    """
    if sigma2 == 0.0:
        return 0.0
    if sigma2 > SIGMA2_UNIFORM_CUTOFF:
        return -math.pi + TWO_PI * gen.random()
    sigma = math.sqrt(sigma2)
    lo = norm_cdf(-math.pi / sigma)
    hi = 1.0 - lo
    u = lo + (hi - lo) * gen.random()
    if u <= 0.0:
        u = 5e-324  # lo can underflow to 0 for tiny sigma; keep u in (0, 1)
    beta = sigma * inv_norm_cdf(u)
    if beta < -math.pi:
        beta = -math.pi
    elif beta >= math.pi:
        beta = PI_OPEN
    return beta


@njit(cache=True)
def step_agent(x, y, xsx, xsy, alpha, phi_max, b,
               kind, p0, p1, p2, drops, n_drops, t, gen):
    """One movement-model timestep from (x, y); returns (nx, ny, beta, resamples).

    The heading-noise variance is fixed from the start-of-step position; a
    candidate step leaving the phi_max disk redraws beta from that same
    position. All attempts count as the one timestep.
    """
    mx = xsx - x
    my = xsy - y
    phi = math.hypot(mx, my)
    if phi == 0.0:
        sigma2 = np.inf  # sitting on the target: no bearing, heading uniform
    else:
        sigma2 = sigma_squared_from(kind, p0, p1, p2, drops, n_drops, phi, t, b)
    resamples = 0
    while True:
        beta = sample_beta(sigma2, gen)
        if phi == 0.0:
            dx = math.cos(beta)
            dy = math.sin(beta)
        else:
            cb = math.cos(beta)
            sb = math.sin(beta)
            ux = mx / phi
            uy = my / phi
            dx = cb * ux - sb * uy
            dy = sb * ux + cb * uy
        nx = x + alpha * dx
        ny = y + alpha * dy
        if math.hypot(nx - xsx, ny - xsy) <= phi_max:
            return nx, ny, beta, resamples
        resamples += 1
        if resamples >= RESAMPLE_CAP:
            raise RuntimeError(
                "boundary resampling exceeded cap; step length is too large "
                "relative to the arena"
            )


@njit(cache=True)
def run_single_walk(x0x, x0y, xsx, xsy, alpha, epsilon, phi_max, b,
                    kind, p0, p1, p2, drops, n_drops,
                    step_cap, gen, traj, stride):
    """Walk one agent until detection (phi <= epsilon) or the step cap.

    Detection is checked once at t = 0 and after each completed step. When
    ``stride`` > 0, (t, x, y) is recorded into ``traj`` every ``stride``
    timesteps (including t = 0) plus at the final position.

    Returns (delivered, time, x, y, n_recorded); ``time`` is the hitting time
    when delivered, else the step cap.
    """
    x = x0x
    y = x0y
    nrec = 0
    if stride > 0 and nrec < traj.shape[0]:
        traj[nrec, 0] = 0.0
        traj[nrec, 1] = x
        traj[nrec, 2] = y
        nrec += 1
    if math.hypot(x - xsx, y - xsy) <= epsilon:
        return True, 0, x, y, nrec
    for t in range(1, step_cap + 1):
        x, y, beta, rs = step_agent(x, y, xsx, xsy, alpha, phi_max, b,
                                    kind, p0, p1, p2, drops, n_drops,
                                    float(t), gen)
        if stride > 0 and t % stride == 0 and nrec < traj.shape[0]:
            traj[nrec, 0] = float(t)
            traj[nrec, 1] = x
            traj[nrec, 2] = y
            nrec += 1
        if math.hypot(x - xsx, y - xsy) <= epsilon:
            if stride > 0 and t % stride != 0 and nrec < traj.shape[0]:
                traj[nrec, 0] = float(t)
                traj[nrec, 1] = x
                traj[nrec, 2] = y
                nrec += 1
            return True, t, x, y, nrec
    return False, step_cap, x, y, nrec


@njit(cache=True)
def walk_snapshots(x0x, x0y, xsx, xsy, alpha, phi_max, b,
                   kind, p0, p1, p2, drops, n_drops,
                   snap_times, out_phi, gen):
    """Walk without absorption, recording distance-to-target at given times.

    ``snap_times`` must be strictly increasing positive ints; the walk runs to
    the last of them.
    """
    x = x0x
    y = x0y
    k = 0
    t_end = snap_times[len(snap_times) - 1]
    for t in range(1, t_end + 1):
        x, y, beta, rs = step_agent(x, y, xsx, xsy, alpha, phi_max, b,
                                    kind, p0, p1, p2, drops, n_drops,
                                    float(t), gen)
        if t == snap_times[k]:
            out_phi[k] = math.hypot(x - xsx, y - xsy)
            k += 1


@njit(cache=True)
def run_active_swarm(n, n_drug, x0x, x0y, xsx, xsy, alpha, epsilon, phi_max, b,
                     P, D, quota, step_cap, gen,
                     ev_t, ev_agent, ev_code, ev_x, ev_y,
                     deliver_t, drop_times, z_init, xs, ys, traj, stride):
    """Lockstep swarm run with agent-released signal drops.

    Agents 0..n_drug-1 carry drug payloads, the rest carry signal payloads;
    all start at (x0x, x0y). Within each timestep agents step in ascending id
    against the start-of-step field (a drop registered at t contributes only
    from t + 1, enforced by the strict-inequality rule in the field kernels).
    An agent within epsilon of the target after its step delivers and is
    removed: signal agents append to ``drop_times``, drug agents count toward
    the quota. The run ends when the quota is met at the end of a timestep, or
    at the step cap, whereupon still-active agents are marked capped.

    The first ``z_init`` entries of ``drop_times`` are pre-existing drops
    already in effect; agent drops are appended after them.

    When ``stride`` > 0, every agent's position is written to
    ``traj[rec, agent, 0:2]`` each ``stride`` timesteps (NaN once removed).

    Returns (runtime_to_quota, first_drop_time, y_final, z_final, n_events,
    n_recorded); times are -1 when the corresponding event never happened.
    ``xs``/``ys`` hold every agent's final position on return.
    """
    for i in range(n):
        xs[i] = x0x
        ys[i] = x0y
    active = np.ones(n, dtype=np.uint8)
    n_events = 0
    y_count = 0
    z_count = z_init
    t_first_drop = -1
    runtime = -1
    nrec = 0

    if stride > 0 and nrec < traj.shape[0]:
        for i in range(n):
            traj[nrec, i, 0] = xs[i]
            traj[nrec, i, 1] = ys[i]
        nrec += 1

    # Detection at t = 0 (all agents start at the same point).
    if math.hypot(x0x - xsx, x0y - xsy) <= epsilon:
        for i in range(n):
            active[i] = 0
            deliver_t[i] = 0
            ev_t[n_events] = 0
            ev_agent[n_events] = i
            ev_x[n_events] = xs[i]
            ev_y[n_events] = ys[i]
            if i < n_drug:
                ev_code[n_events] = EVENT_DROP_DRUG
                y_count += 1
            else:
                ev_code[n_events] = EVENT_DROP_SIGNAL
                drop_times[z_count] = 0.0
                z_count += 1
                t_first_drop = 0
            n_events += 1
        if y_count >= quota:
            runtime = 0
        return runtime, t_first_drop, y_count, z_count, n_events, nrec

    for t in range(1, step_cap + 1):
        tf = float(t)
        for i in range(n):
            if active[i] == 0:
                continue
            nx, ny, beta, rs = step_agent(
                xs[i], ys[i], xsx, xsy, alpha, phi_max, b,
                FIELD_DYNAMIC, P, D, 0.0, drop_times, z_count, tf, gen)
            xs[i] = nx
            ys[i] = ny
            if math.hypot(nx - xsx, ny - xsy) <= epsilon:
                active[i] = 0
                deliver_t[i] = t
                ev_t[n_events] = t
                ev_agent[n_events] = i
                ev_x[n_events] = nx
                ev_y[n_events] = ny
                if i < n_drug:
                    ev_code[n_events] = EVENT_DROP_DRUG
                    y_count += 1
                else:
                    ev_code[n_events] = EVENT_DROP_SIGNAL
                    drop_times[z_count] = tf
                    z_count += 1
                    if t_first_drop < 0:
                        t_first_drop = t
                n_events += 1
        if stride > 0 and t % stride == 0 and nrec < traj.shape[0]:
            for i in range(n):
                if active[i] == 1:
                    traj[nrec, i, 0] = xs[i]
                    traj[nrec, i, 1] = ys[i]
                else:
                    traj[nrec, i, 0] = np.nan
                    traj[nrec, i, 1] = np.nan
            nrec += 1
        if y_count >= quota:
            runtime = t
            break

    if runtime < 0:
        for i in range(n):
            if active[i] == 1:
                ev_t[n_events] = step_cap
                ev_agent[n_events] = i
                ev_code[n_events] = EVENT_CAPPED
                ev_x[n_events] = xs[i]
                ev_y[n_events] = ys[i]
                n_events += 1
    return runtime, t_first_drop, y_count, z_count, n_events, nrec
