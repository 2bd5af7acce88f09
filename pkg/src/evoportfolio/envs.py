"""In-repo continuous-control tasks behind a uniform episodic interface.

All three tasks share the same protocol:

    state = env.reset(rng)
    next_state, reward, done, truncated = env.step(action)

`done` is True at a true terminal state or at the step limit; `truncated`
distinguishes the step-limit case so replay storage can keep bootstrapping
through artificial episode boundaries.  Actions are given in the
environment's native bounds (env.spec.action_low/high) and are clipped
internally.

Tasks:

* PointNav2D - a velocity-controlled point in the plane seeking a goal
  band around the origin.  Dense reward, fully deterministic, closed-form
  optimum.
* DelayedChain - a 1-D corridor with a small per-step movement penalty and
  a large bonus at the far end.  A greedy (short-horizon) policy refuses
  to pay the movement cost and stalls; only credit over the whole episode
  justifies walking the corridor.
* NoisyPendulum - torque-limited pendulum swing-up with Gaussian
  observation noise, the hardest of the three.
"""

import numpy as np

from .errors import ConfigError, StateError


class EnvSpec:
    """Static description of a task's interface."""

    def __init__(self, name, state_dim, action_dim, action_low, action_high, max_steps):
        self.name = name
        self.state_dim = int(state_dim)
        self.action_dim = int(action_dim)
        self.action_low = np.asarray(action_low, dtype=np.float64)
        self.action_high = np.asarray(action_high, dtype=np.float64)
        self.max_steps = int(max_steps)

    def scale_action(self, unit_action):
        """Map an action in [-1,1]^d onto the native bounds."""
        a = np.clip(np.asarray(unit_action, dtype=np.float64), -1.0, 1.0)
        if (self.action_low == -1.0).all() and (self.action_high == 1.0).all():
            return a  # unit bounds pass through exactly
        return self.action_low + (a + 1.0) * 0.5 * (self.action_high - self.action_low)


class _EpisodeBase:
    """Step-counter and done-flag plumbing shared by the tasks."""

    def __init__(self, spec):
        self.spec = spec
        self.steps = 0
        self.done = True  # must reset before stepping

    def _begin(self):
        self.steps = 0
        self.done = False

    def _clip_action(self, action):
        if self.done:
            raise StateError(f"{self.spec.name}: step() after episode end")
        a = np.asarray(action, dtype=np.float64).reshape(-1)
        if a.shape != (self.spec.action_dim,):
            raise ConfigError(
                f"{self.spec.name}: action shape {a.shape}, expected ({self.spec.action_dim},)"
            )
        return np.clip(a, self.spec.action_low, self.spec.action_high)

    def _finish(self, terminal):
        """Advance the step counter; returns (done, truncated)."""
        self.steps += 1
        truncated = (not terminal) and self.steps >= self.spec.max_steps
        self.done = terminal or truncated
        return self.done, truncated


class PointNav2D(_EpisodeBase):
    """2-D point mass commanded by per-axis velocities in [-1,1].

    p' = clip(p + dt * a, -box, box); reward = -max(||p'|| - band, 0), so
    anywhere inside the goal band around the origin is free.  Starts are
    drawn on an annulus (radius U[0.7, 1.3], angle uniform) so every
    episode poses a comparable approach problem, and the band means the
    score measures how quickly and directly a policy closes that distance
    rather than how precisely it can park: a controller that reaches the
    band and merely circles inside it is already optimal.  Episodes always
    run max_steps then truncate.  Fully deterministic given the start.
    """

    DT = 0.05
    BAND = 0.1
    R_MIN = 0.7
    R_MAX = 1.3
    BOX = 2.0

    def __init__(self, max_steps=100):
        super().__init__(
            EnvSpec("pointnav2d", 2, 2, [-1.0, -1.0], [1.0, 1.0], max_steps)
        )
        self.pos = np.zeros(2)

    def reset(self, rng):
        self._begin()
        r = rng.uniform(self.R_MIN, self.R_MAX)
        theta = rng.uniform(0.0, 2.0 * np.pi)
        self.pos = r * np.array([np.cos(theta), np.sin(theta)])
        return self.pos.copy()

    def step(self, action):
        a = self._clip_action(action)
        self.pos = np.clip(self.pos + self.DT * a, -self.BOX, self.BOX)
        dist = float(np.hypot(self.pos[0], self.pos[1]))
        reward = -max(dist - self.BAND, 0.0)
        done, truncated = self._finish(terminal=False)
        return self.pos.copy(), reward, done, truncated

    def optimal_return(self, start):
        """Closed-form best possible return from a given start.

        Per-axis speed is box-bounded, so |p_i| can shrink by at most dt
        per step and the bound is achieved by moving each axis toward 0 at
        full speed.  The norm is monotone in each |p_i| and the band clamp
        is monotone in the norm, hence the per-step rewards
        -max(||q(t)|| - band, 0) with q_i(t) = max(|p_i| - t*dt, 0) are
        each individually maximal.
        """
        p = np.abs(np.asarray(start, dtype=np.float64))
        t = np.arange(1, self.spec.max_steps + 1)[:, None]
        q = np.maximum(p[None, :] - t * self.DT, 0.0)
        dist = np.sqrt((q * q).sum(axis=1))
        return float(-np.maximum(dist - self.BAND, 0.0).sum())


class DelayedChain(_EpisodeBase):
    """1-D corridor from x=0 to x=L with delayed payoff.

    x' = clip(x + dt*a, 0, L); every step costs move_cost * |a|; reaching
    the far end pays +bonus and terminates.  The goal test uses a 1e-9
    tolerance so float accumulation of dt cannot mask arrival.  Reward per
    step is in [-move_cost, bonus].

    The numbers are chosen to make the horizon split sharp: covering the
    corridor takes 40 of the 50 steps at full speed, so only a policy that
    pushes right nearly everywhere ever sees the bonus, and the movement
    cost is steep enough relative to the bonus that maximizing immediate
    reward means standing still.  Anyone who does not finish scores <= 0.
    """

    DT = 0.025
    LENGTH = 1.0
    MOVE_COST = 0.1
    BONUS = 10.0
    GOAL_TOL = 1e-9

    def __init__(self, max_steps=50):
        super().__init__(EnvSpec("delayedchain", 1, 1, [-1.0], [1.0], max_steps))
        self.x = 0.0

    def reset(self, rng):
        self._begin()
        self.x = 0.0
        return np.array([self.x])

    def step(self, action):
        a = float(self._clip_action(action)[0])
        self.x = float(np.clip(self.x + self.DT * a, 0.0, self.LENGTH))
        reward = -self.MOVE_COST * abs(a)
        terminal = self.x >= self.LENGTH - self.GOAL_TOL
        if terminal:
            reward += self.BONUS
        done, truncated = self._finish(terminal)
        return np.array([self.x]), reward, done, truncated

    def optimal_return(self, start):
        """Best possible return from position x0.

        Total movement cost is move_cost * sum|a_t| >= move_cost * dist/dt
        for any trajectory covering dist = L - x0, achieved by full-speed
        travel; if the corridor cannot be covered within the step limit the
        best return is 0 (stand still).
        """
        x0 = float(np.asarray(start).reshape(-1)[0])
        dist = self.LENGTH - x0
        if dist <= self.GOAL_TOL:
            return float(self.BONUS)
        steps_needed = int(np.ceil(dist / self.DT - 1e-12))
        if steps_needed > self.spec.max_steps:
            return 0.0
        return float(self.BONUS - self.MOVE_COST * dist / self.DT)


class NoisyPendulum(_EpisodeBase):
    """Torque-limited pendulum swing-up with noisy observations.

    Physical state (theta, theta_dot); observation [cos, sin, theta_dot]
    plus N(0, obs_sigma^2) noise per component.  Dynamics (dt Euler):
    theta_dot' = theta_dot + (1.5*G*sin(theta) + 3*u) * dt, clipped to
    +-max_speed; theta' = theta + theta_dot' * dt.  Reward is the negative
    quadratic cost -(wrap(theta)^2 + 0.1*theta_dot^2 + 0.001*u^2), bounded
    to [-(pi^2 + 0.1*64 + 0.001*4), 0].  Episodes truncate at max_steps.
    """

    DT = 0.05
    G = 10.0
    MAX_SPEED = 8.0
    MAX_TORQUE = 2.0
    OBS_SIGMA = 0.05

    def __init__(self, max_steps=200):
        super().__init__(
            EnvSpec("noisypendulum", 3, 1, [-self.MAX_TORQUE], [self.MAX_TORQUE], max_steps)
        )
        self.theta = 0.0
        self.theta_dot = 0.0
        self._noise_rng = None

    @staticmethod
    def _wrap(angle):
        return (angle + np.pi) % (2.0 * np.pi) - np.pi

    def _observe(self):
        obs = np.array([np.cos(self.theta), np.sin(self.theta), self.theta_dot])
        return obs + self._noise_rng.normal(0.0, self.OBS_SIGMA, 3)

    def reset(self, rng):
        self._begin()
        self.theta = rng.uniform(-np.pi, np.pi)
        self.theta_dot = rng.uniform(-1.0, 1.0)
        self._noise_rng = rng
        return self._observe()

    def step(self, action):
        u = float(self._clip_action(action)[0])
        cost = self._wrap(self.theta) ** 2 + 0.1 * self.theta_dot**2 + 0.001 * u**2
        self.theta_dot = self.theta_dot + (1.5 * self.G * np.sin(self.theta) + 3.0 * u) * self.DT
        self.theta_dot = float(np.clip(self.theta_dot, -self.MAX_SPEED, self.MAX_SPEED))
        self.theta = self.theta + self.theta_dot * self.DT
        done, truncated = self._finish(terminal=False)
        return self._observe(), -float(cost), done, truncated

    def optimal_return(self, start):
        return None  # no closed form


_REGISTRY = {
    "pointnav2d": PointNav2D,
    "delayedchain": DelayedChain,
    "noisypendulum": NoisyPendulum,
}


def make_env(name, max_steps=None):
    """Instantiate a task by registry name."""
    key = name.lower()
    if key not in _REGISTRY:
        raise ConfigError(f"unknown env {name!r}; choose from {sorted(_REGISTRY)}")
    if max_steps is None:
        return _REGISTRY[key]()
    return _REGISTRY[key](max_steps=max_steps)


def env_names():
    return sorted(_REGISTRY)
