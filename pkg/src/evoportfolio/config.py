"""Run configuration: TOML loading, validation, defaults, and snapshots.

A config file has four optional sections -- [experiment], [portfolio],
[evolution], [network] -- whose keys map one-to-one onto RunConfig fields.
Missing keys fall back to the desk-scale defaults below; profile="paper"
swaps in the full-scale values (hidden [400,300], buffer 1e6, 1M steps)
before file overrides apply.  Unknown keys and out-of-range values raise
ConfigError naming the offending key.

save_config emits a canonical snapshot that reloads to an identical
RunConfig, which is what makes archived runs exactly re-runnable.
"""

from dataclasses import dataclass, field

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError

DESK_PROFILE = {"hidden": [64, 64], "buffer_capacity": 200_000, "max_env_steps": 150_000}
PAPER_PROFILE = {"hidden": [400, 300], "buffer_capacity": 1_000_000, "max_env_steps": 1_000_000}


@dataclass
class RunConfig:
    # experiment
    env: str = "pointnav2d"
    seeds: list = field(default_factory=lambda: [2018, 2019, 2020, 2021, 2022])
    max_env_steps: int = 150_000
    out_dir: str = "runs/default"
    workers: int = 1
    champion_episodes: int = 10
    target_fraction: float = 0.0  # 0 disables early stopping
    max_episode_steps: int = 0    # 0 means the env's native default
    profile: str = "desk"
    # portfolio
    gammas: list = field(default_factory=lambda: [0.9, 0.99, 0.997, 0.9995])
    b: int = 10
    ucb_c: float = 0.9
    alpha: float = 0.2
    tau: float = 5e-3
    policy_delay: int = 2
    actor_lr: float = 1e-3
    critic_lr: float = 1e-3
    batch_size: int = 256
    buffer_capacity: int = 200_000
    explore_sigma: float = 0.1
    smoothing_sigma: float = 0.2
    smoothing_clip: float = 0.5
    soft_update_every_iter: bool = True
    # evolution
    k: int = 10
    elites: int = 0  # 0 means k // 5
    omega: int = 5
    tournament_size: int = 3
    crossover_frac: float = 0.5
    mut_prob: float = 0.9
    mut_frac: float = 0.1
    mut_strength: float = 0.1
    supermut_prob: float = 0.05
    reset_prob: float = 0.05
    # network
    hidden: list = field(default_factory=lambda: [64, 64])

    @property
    def elite_count(self):
        return self.elites if self.elites > 0 else max(1, self.k // 5)

    @property
    def q(self):
        return len(self.gammas)


_SECTIONS = {
    "experiment": ["env", "seeds", "max_env_steps", "out_dir", "workers",
                   "champion_episodes", "target_fraction", "max_episode_steps",
                   "profile"],
    "portfolio": ["gammas", "b", "ucb_c", "alpha", "tau", "policy_delay",
                  "actor_lr", "critic_lr", "batch_size", "buffer_capacity",
                  "explore_sigma", "smoothing_sigma", "smoothing_clip",
                  "soft_update_every_iter"],
    "evolution": ["k", "elites", "omega", "tournament_size", "crossover_frac",
                  "mut_prob", "mut_frac", "mut_strength", "supermut_prob",
                  "reset_prob"],
    "network": ["hidden"],
}

def _coerce(section, key, value, default):
    """Check a raw TOML value against the field's default type."""
    where = f"{section}.{key}"
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected a boolean, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list, got {value!r}")
        return list(value)
    raise ConfigError(f"{where}: unsupported value {value!r}")


def load_config(path):
    """Parse, fill defaults (honoring the profile), and validate."""
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from e

    for section in data:
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")

    profile = data.get("experiment", {}).get("profile", "desk")
    if profile not in ("desk", "paper"):
        raise ConfigError(f"experiment.profile: must be 'desk' or 'paper', got {profile!r}")
    cfg = RunConfig(profile=profile)
    if profile == "paper":
        for key, value in PAPER_PROFILE.items():
            setattr(cfg, key, value)

    defaults = RunConfig()
    for section, keys in _SECTIONS.items():
        table = data.get(section, {})
        for key, value in table.items():
            if key not in keys:
                raise ConfigError(f"unknown key {section}.{key}")
            setattr(cfg, key, _coerce(section, key, value, getattr(defaults, key)))
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    """Range and consistency checks; error messages name the key."""
    def bad(key, msg):
        raise ConfigError(f"{key}: {msg}")

    if cfg.k < 2:
        bad("evolution.k", f"population needs at least 2 actors, got {cfg.k}")
    e = cfg.elite_count
    if not 1 <= e < cfg.k:
        bad("evolution.elites", f"need 1 <= elites < k, got {e} with k={cfg.k}")
    if cfg.q < 1:
        bad("portfolio.gammas", "portfolio needs at least one learner")
    if cfg.q > cfg.k:
        bad("portfolio.gammas", f"portfolio size {cfg.q} exceeds population size {cfg.k}")
    for g in cfg.gammas:
        if not 0.0 <= g <= 1.0:
            bad("portfolio.gammas", f"discount {g} outside [0,1]")
    if cfg.b < 1:
        bad("portfolio.b", f"rollout budget must be >= 1, got {cfg.b}")
    if not 0.0 < cfg.alpha <= 1.0:
        bad("portfolio.alpha", f"must be in (0,1], got {cfg.alpha}")
    if not 0.0 <= cfg.tau <= 1.0:
        bad("portfolio.tau", f"must be in [0,1], got {cfg.tau}")
    if cfg.ucb_c < 0:
        bad("portfolio.ucb_c", f"must be >= 0, got {cfg.ucb_c}")
    if cfg.policy_delay < 1:
        bad("portfolio.policy_delay", f"must be >= 1, got {cfg.policy_delay}")
    if cfg.batch_size < 1:
        bad("portfolio.batch_size", f"must be >= 1, got {cfg.batch_size}")
    if cfg.buffer_capacity < cfg.batch_size:
        bad("portfolio.buffer_capacity",
            f"must hold at least one batch ({cfg.batch_size}), got {cfg.buffer_capacity}")
    for key in ("explore_sigma", "smoothing_sigma", "smoothing_clip",
                "actor_lr", "critic_lr"):
        if getattr(cfg, key) < 0:
            bad(f"portfolio.{key}", f"must be >= 0, got {getattr(cfg, key)}")
    for key in ("mut_prob", "mut_frac", "supermut_prob", "reset_prob",
                "crossover_frac"):
        v = getattr(cfg, key)
        if not 0.0 <= v <= 1.0:
            section = "evolution"
            bad(f"{section}.{key}", f"must be in [0,1], got {v}")
    if cfg.mut_strength < 0:
        bad("evolution.mut_strength", f"must be >= 0, got {cfg.mut_strength}")
    if cfg.omega < 1:
        bad("evolution.omega", f"must be >= 1, got {cfg.omega}")
    if cfg.tournament_size < 1:
        bad("evolution.tournament_size", f"must be >= 1, got {cfg.tournament_size}")
    if not cfg.seeds:
        bad("experiment.seeds", "need at least one seed")
    if len(set(cfg.seeds)) != len(cfg.seeds):
        bad("experiment.seeds", "seeds must be distinct")
    if cfg.max_env_steps < 0:
        bad("experiment.max_env_steps", f"must be >= 0, got {cfg.max_env_steps}")
    if cfg.workers < 1:
        bad("experiment.workers", f"must be >= 1, got {cfg.workers}")
    if cfg.champion_episodes < 1:
        bad("experiment.champion_episodes", f"must be >= 1, got {cfg.champion_episodes}")
    if not 0.0 <= cfg.target_fraction <= 1.0:
        bad("experiment.target_fraction", f"must be in [0,1], got {cfg.target_fraction}")
    if cfg.max_episode_steps < 0:
        bad("experiment.max_episode_steps", f"must be >= 0, got {cfg.max_episode_steps}")
    if len(cfg.hidden) < 1 or any(int(h) < 2 for h in cfg.hidden):
        bad("network.hidden", f"hidden widths must all be >= 2, got {cfg.hidden}")
    return cfg


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int,)):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise ConfigError(f"cannot serialize {v!r}")


def dumps_config(cfg):
    """Canonical snapshot text; load_config of it returns an equal config."""
    lines = []
    for section, keys in _SECTIONS.items():
        lines.append(f"[{section}]")
        for key in keys:
            lines.append(f"{key} = {_toml_value(getattr(cfg, key))}")
        lines.append("")
    return "\n".join(lines)


def save_config(cfg, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps_config(cfg))
