"""One portfolio learner: a TD3 actor-critic pinned to its own discount rate.

All learning happens in the unit action space [-1,1]^d (the actor's tanh
range); rollout code scales to native env bounds at the boundary.  Critics
take the concatenation [state, action] as input.

The learner carries the two statistics the resource manager reads: a
cumulative rollout count y and an exponentially smoothed return v.
"""

import numpy as np

from .errors import NumericError
from .nets import AdamState, MlpParams, adam_step, backward, forward
from .nets import soft_update as blend


class Learner:
    """TD3 with twin critics, target networks, and delayed actor updates."""

    def __init__(self, gamma, state_dim, action_dim, hidden, rng,
                 actor_lr=1e-3, critic_lr=1e-3, tau=5e-3, policy_delay=2,
                 smoothing_sigma=0.2, smoothing_clip=0.5):
        if not 0.0 <= gamma <= 1.0:
            raise ValueError(f"gamma must be in [0,1], got {gamma}")
        self.gamma = float(gamma)
        self.state_dim = int(state_dim)
        self.action_dim = int(action_dim)
        self.tau = float(tau)
        self.policy_delay = int(policy_delay)
        self.smoothing_sigma = float(smoothing_sigma)
        self.smoothing_clip = float(smoothing_clip)

        actor_dims = [state_dim, *hidden, action_dim]
        critic_dims = [state_dim + action_dim, *hidden, 1]
        self.actor = MlpParams(actor_dims, squash="tanh", rng=rng)
        self.critic_a = MlpParams(critic_dims, squash="identity", rng=rng)
        self.critic_b = MlpParams(critic_dims, squash="identity", rng=rng)
        self.target_actor = self.actor.copy()
        self.target_critic_a = self.critic_a.copy()
        self.target_critic_b = self.critic_b.copy()

        self.actor_opt = AdamState(self.actor.n_params, lr=actor_lr)
        self.critic_a_opt = AdamState(self.critic_a.n_params, lr=critic_lr)
        self.critic_b_opt = AdamState(self.critic_b.n_params, lr=critic_lr)

        self.count = 0          # cumulative rollouts attributed to this learner
        self.value = 0.0        # smoothed rollout return
        self.update_counter = 0  # critic updates so far (drives actor delay)
        self.actor_updates = 0
        self.rng = rng


def compute_targets(learner, batch, rng):
    """Bootstrapped TD targets with smoothed target-policy actions.

    a~ = clip(target_actor(s') + clip(eps, -c, c), -1, 1) with
    eps ~ N(0, sigma^2); y = r + gamma * (1 - done) * min(Qa'(s',a~),
    Qb'(s',a~)).  Targets are constants: nothing here records a tape.
    """
    next_a, _ = forward(learner.target_actor, batch.next_states, need_tape=False)
    if learner.smoothing_sigma > 0:
        noise = rng.normal(0.0, learner.smoothing_sigma, next_a.shape)
        np.clip(noise, -learner.smoothing_clip, learner.smoothing_clip, out=noise)
        next_a = np.clip(next_a + noise, -1.0, 1.0)
    nx = np.concatenate([batch.next_states, next_a], axis=1)
    qa, _ = forward(learner.target_critic_a, nx, need_tape=False)
    qb, _ = forward(learner.target_critic_b, nx, need_tape=False)
    q_min = np.minimum(qa[:, 0], qb[:, 0])
    y = batch.rewards + learner.gamma * (1.0 - batch.dones) * q_min
    if not np.isfinite(y).all():
        raise NumericError("non-finite critic target; update aborted")
    return y


def critic_update(learner, batch, rng):
    """One Bellman regression step on both critics; returns the summed loss."""
    T = len(batch)
    if T < 1:
        raise ValueError("empty minibatch")
    y = compute_targets(learner, batch, rng)
    xs = np.concatenate([batch.states, batch.actions], axis=1)
    total = 0.0
    for critic, opt in (
        (learner.critic_a, learner.critic_a_opt),
        (learner.critic_b, learner.critic_b_opt),
    ):
        q, tape = forward(critic, xs)
        err = q[:, 0] - y
        total += float((err * err).mean())
        grad, _ = backward(tape, (2.0 / T) * err[:, None])
        adam_step(critic, grad, opt)
    learner.update_counter += 1
    return total


def actor_update(learner, batch):
    """Ascend mean Qa(s, pi(s)) through the first critic.

    The critic only provides the gradient path; its parameters and
    optimizer are untouched.
    """
    T = len(batch)
    if T < 1:
        raise ValueError("empty minibatch")
    actions, actor_tape = forward(learner.actor, batch.states)
    xs = np.concatenate([batch.states, actions], axis=1)
    _, critic_tape = forward(learner.critic_a, xs)
    # minimize -mean Q => dL/dQ = -1/T
    _, dx = backward(critic_tape, np.full((T, 1), -1.0 / T))
    d_action = dx[:, learner.state_dim:]
    grad, _ = backward(actor_tape, d_action)
    adam_step(learner.actor, grad, learner.actor_opt)
    learner.actor_updates += 1


def soft_update(learner):
    """Blend every target toward its source by tau."""
    blend(learner.target_actor, learner.actor, learner.tau)
    blend(learner.target_critic_a, learner.critic_a, learner.tau)
    blend(learner.target_critic_b, learner.critic_b, learner.tau)


def update_value_stat(learner, rollout_return, alpha):
    """v <- alpha * return + (1 - alpha) * v; count += 1."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0,1], got {alpha}")
    if not np.isfinite(rollout_return):
        raise NumericError("non-finite rollout return")
    learner.value = alpha * rollout_return + (1.0 - alpha) * learner.value
    learner.count += 1


def behavioral_action(learner, state, sigma_explore, rng):
    """Exploratory unit-space action: clip(pi(state) + N(0, sigma^2), -1, 1)."""
    s = np.asarray(state, dtype=np.float64)
    a, _ = forward(learner.actor, s[None, :], need_tape=False)
    a = a[0]
    if sigma_explore > 0:
        a = a + rng.normal(0.0, sigma_explore, a.shape)
    return np.clip(a, -1.0, 1.0)
