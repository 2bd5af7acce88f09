"""Shared cyclic experience buffer.

Every actor in the system (evolutionary genomes and learner behavioral
policies) pushes its transitions here; every learner samples minibatches
from it.  Storage is columnar preallocated arrays behind a ring cursor:
once full, the oldest entry is overwritten first.

The stored done flag is a bootstrap mask: 1.0 only for true terminal
states.  Episodes cut off by the step limit are stored with done=0 so the
critic target keeps bootstrapping through the artificial boundary.
"""

import struct

import numpy as np

from .errors import InsufficientDataError, NumericError, ShapeError

_SNAP_MAGIC = b"EVPB"
_SNAP_VERSION = 1


class Minibatch:
    """Column view of T sampled transitions."""

    def __init__(self, states, actions, rewards, next_states, dones):
        self.states = states
        self.actions = actions
        self.rewards = rewards
        self.next_states = next_states
        self.dones = dones

    def __len__(self):
        return self.states.shape[0]


class ReplayBuffer:
    """FIFO ring of transitions with uniform minibatch sampling."""

    def __init__(self, capacity, state_dim, action_dim):
        capacity = int(capacity)
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.state_dim = int(state_dim)
        self.action_dim = int(action_dim)
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.dones = np.zeros(capacity)
        self.ptr = 0
        self.size = 0

    def push(self, state, action, reward, next_state, done):
        """Append one transition, evicting the oldest when full."""
        state = np.asarray(state, dtype=np.float64)
        action = np.asarray(action, dtype=np.float64)
        next_state = np.asarray(next_state, dtype=np.float64)
        if state.shape != (self.state_dim,) or next_state.shape != (self.state_dim,):
            raise ShapeError(
                f"state shape {state.shape}/{next_state.shape}, expected ({self.state_dim},)"
            )
        if action.shape != (self.action_dim,):
            raise ShapeError(f"action shape {action.shape}, expected ({self.action_dim},)")
        if not (
            np.isfinite(state).all()
            and np.isfinite(action).all()
            and np.isfinite(next_state).all()
            and np.isfinite(reward)
        ):
            raise NumericError("non-finite transition rejected")
        i = self.ptr
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.dones[i] = 1.0 if done else 0.0
        self.ptr = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def live_indices(self):
        """Indices of live entries in FIFO (oldest first) order."""
        if self.size < self.capacity:
            return np.arange(self.size)
        return np.concatenate([np.arange(self.ptr, self.capacity), np.arange(self.ptr)])

    def sample(self, T, rng):
        """Draw T transitions uniformly with replacement from live entries."""
        T = int(T)
        if T < 1:
            raise ValueError(f"minibatch size must be >= 1, got {T}")
        if self.size < T:
            raise InsufficientDataError(
                f"buffer holds {self.size} transitions, need {T}"
            )
        idx = rng.integers(0, self.size, size=T)
        return Minibatch(
            self.states[idx],
            self.actions[idx],
            self.rewards[idx],
            self.next_states[idx],
            self.dones[idx],
        )


def save_buffer(buffer, path):
    """Snapshot live entries to disk, oldest first (same endianness rules as
    network checkpoints: little-endian f64, magic + version header)."""
    order = buffer.live_indices()
    header = struct.pack(
        "<4sIQII", _SNAP_MAGIC, _SNAP_VERSION, len(order),
        buffer.state_dim, buffer.action_dim,
    )
    with open(path, "wb") as f:
        f.write(header)
        for arr in (
            buffer.states[order],
            buffer.actions[order],
            buffer.rewards[order],
            buffer.next_states[order],
            buffer.dones[order],
        ):
            f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_buffer(path, capacity=None):
    """Rebuild a buffer from a snapshot; capacity defaults to entry count."""
    with open(path, "rb") as f:
        raw = f.read()
    head = struct.calcsize("<4sIQII")
    magic, version, n, sdim, adim = struct.unpack_from("<4sIQII", raw)
    if magic != _SNAP_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != _SNAP_VERSION:
        raise ValueError(f"{path}: unsupported snapshot version {version}")
    body = np.frombuffer(raw, dtype="<f8", offset=head)
    sizes = [n * sdim, n * adim, n, n * sdim, n]
    if body.size != sum(sizes):
        raise ValueError(f"{path}: truncated snapshot")
    parts = np.split(body, np.cumsum(sizes)[:-1])
    buf = ReplayBuffer(capacity or max(n, 1), sdim, adim)
    states = parts[0].reshape(n, sdim)
    actions = parts[1].reshape(n, adim)
    next_states = parts[3].reshape(n, sdim)
    for i in range(n):
        buf.push(states[i], actions[i], parts[2][i], next_states[i], parts[4][i])
    return buf
