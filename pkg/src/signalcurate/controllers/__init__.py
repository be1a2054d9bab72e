from .assistant import (
    AssistantConfig,
    AssistantController,
    RLAssistant,
    RLProposal,
    rl_reference,
    train_assistant,
)
from .baselines import (
    FIXED_TIME_DURATION,
    MAX_PRESSURE_DURATION,
    Controller,
    FixedTimeController,
    MaxPressureController,
    RandomController,
    baseline_action,
    greedy_cycle,
)
from .critic import CriticModel, Transition, critic_features, critic_update, critic_value, select_duration
from .encoding import NodeView, StateEncoding, encode_state, phase_pressures, pressure_select_phase
from .pool import ExperiencePool, PoolEntry, build_time_queue_map, propose_history
from .sampler import CandidateSet, GenerativeDurationSampler, build_candidates, propose_generative

CONTROLLER_KINDS = ("random", "fixed_time", "max_pressure", "rl_assistant")


def make_controller(kind: str, sim=None, seed: int = 0, **params) -> Controller:
    """Controller from a kind name and its hyperparameters.

    ``rl_assistant`` loads ``checkpoint`` when given; otherwise it trains a
    fresh assistant on ``sim`` for ``train_episodes`` episodes (default 2).
    """
    if kind == "random":
        return RandomController(**params)
    if kind == "fixed_time":
        return FixedTimeController(**params)
    if kind == "max_pressure":
        return MaxPressureController(**params)
    if kind == "rl_assistant":
        params = dict(params)
        ckpt = params.pop("checkpoint", None)
        episodes = int(params.pop("train_episodes", 2))
        explore = float(params.pop("explore", 0.1))
        if params:
            raise ValueError(f"unknown rl_assistant parameters: {sorted(params)}")
        if ckpt is not None:
            assistant = RLAssistant.load(ckpt)
        else:
            if sim is None:
                raise ValueError("rl_assistant without a checkpoint needs a simulator to train on")
            assistant = train_assistant(sim, seed, episodes, explore)
        return AssistantController(assistant)
    raise ValueError(f"unknown controller kind {kind!r}; expected one of {', '.join(CONTROLLER_KINDS)}")
