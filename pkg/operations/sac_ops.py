"""
Soft actor-critic operations for the AP deployment optimizer
Category 5: Replay buffer, twin critics, actor and temperature updates, training loop
"""

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from operations.env_ops import DeploymentEnv, Transition
from operations.metric_ops import evaluate
from operations.neural_ops import (
    AdamState, MlpGradients, MlpParams, adam_init, adam_step, backward, init_mlp, mlp_forward,
    params_from_dict, params_to_dict, policy_output_backward, policy_sample, policy_sample_backward,
    split_policy_output,
)
from operations.scenario_ops import ConfigError, Deployment

logger = logging.getLogger(__name__)


class InsufficientDataError(ValueError):
    """Raised when the replay buffer holds fewer transitions than requested"""
    pass


@dataclass(frozen=True)
class SacConfig:
    """SAC hyperparameters"""
    hidden_sizes: Tuple[int, ...] = (64, 32)
    learning_rate: float = 1e-5
    buffer_capacity: int = 2 ** 21
    batch_size: int = 2 ** 9
    discount: float = 0.98
    tau: float = 0.005
    target_entropy: Optional[float] = None    # None -> -action_dim
    total_steps: int = 20000
    warmup_steps: int = 1000
    update_every: int = 1
    gradient_steps: int = 1
    eval_every: int = 1000
    eval_episodes: int = 5
    initial_temperature: float = 1.0
    keep_best: bool = False    # return the weights with the highest eval_reward
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if not 0.0 < self.tau <= 1.0:
            raise ConfigError(f"solver.sac.tau must be in (0, 1], got {self.tau}")
        if not 0.0 < self.discount < 1.0:
            raise ConfigError(f"solver.sac.discount must be in (0, 1), got {self.discount}")
        if not 1 <= self.batch_size <= self.buffer_capacity:
            raise ConfigError(
                f"solver.sac.batch_size ({self.batch_size}) must be in [1, buffer_capacity={self.buffer_capacity}]"
            )
        if self.learning_rate <= 0:
            raise ConfigError(f"solver.sac.learning_rate must be > 0, got {self.learning_rate}")
        if self.initial_temperature <= 0:
            raise ConfigError(f"solver.sac.initial_temperature must be > 0, got {self.initial_temperature}")
        for name in ("total_steps", "warmup_steps", "eval_every"):
            if getattr(self, name) < 0:
                raise ConfigError(f"solver.sac.{name} must be >= 0")
        for name in ("update_every", "gradient_steps", "eval_episodes"):
            if getattr(self, name) < 1:
                raise ConfigError(f"solver.sac.{name} must be >= 1")

    def entropy_target(self, action_dim: int) -> float:
        return -float(action_dim) if self.target_entropy is None else float(self.target_entropy)


@dataclass
class TransitionBatch:
    """Stacked transitions"""
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray

    def __len__(self) -> int:
        return len(self.rewards)


class ReplayBuffer:
    """
    FIFO ring buffer of transitions

    Storage grows by doubling up to the capacity, so the 2**21 default does not
    allocate memory that is never filled.
    """

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        if capacity < 1:
            raise ValueError(f"Replay buffer capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.size = 0
        self.ptr = 0
        self._allocate(min(capacity, 1024))

    def _allocate(self, n: int) -> None:
        old = getattr(self, "states", None)
        states = np.zeros((n, self.state_dim))
        actions = np.zeros((n, self.action_dim))
        rewards = np.zeros(n)
        next_states = np.zeros((n, self.state_dim))
        dones = np.zeros(n)
        if old is not None:
            k = self.size
            states[:k] = self.states[:k]
            actions[:k] = self.actions[:k]
            rewards[:k] = self.rewards[:k]
            next_states[:k] = self.next_states[:k]
            dones[:k] = self.dones[:k]
        self.states, self.actions, self.rewards = states, actions, rewards
        self.next_states, self.dones = next_states, dones

    def __len__(self) -> int:
        return self.size

    def push(self, t: Transition) -> None:
        if not math.isfinite(t.reward):
            raise ValueError(f"Refusing to store non-finite reward {t.reward}")
        if self.size == len(self.rewards) and self.size < self.capacity:
            self._allocate(min(2 * len(self.rewards), self.capacity))
        i = self.ptr
        self.states[i] = t.state
        self.actions[i] = t.action
        self.rewards[i] = t.reward
        self.next_states[i] = t.next_state
        self.dones[i] = float(t.done)
        self.ptr = (self.ptr + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def _take(self, idx: np.ndarray) -> TransitionBatch:
        return TransitionBatch(
            states=self.states[idx].copy(),
            actions=self.actions[idx].copy(),
            rewards=self.rewards[idx].copy(),
            next_states=self.next_states[idx].copy(),
            dones=self.dones[idx].copy(),
        )

    def contents(self) -> TransitionBatch:
        """Everything stored, oldest first"""
        start = self.ptr if self.size == self.capacity else 0
        idx = (start + np.arange(self.size)) % self.capacity
        return self._take(idx)

    def sample(self, batch_size: int, rng: np.random.Generator) -> TransitionBatch:
        if self.size < batch_size:
            raise InsufficientDataError(
                f"Replay buffer holds {self.size} transitions, batch of {batch_size} requested"
            )
        return self._take(rng.integers(0, self.size, size=batch_size))


def buffer_push(buf: ReplayBuffer, t: Transition) -> ReplayBuffer:
    buf.push(t)
    return buf


def buffer_sample(buf: ReplayBuffer, batch_size: int, rng: np.random.Generator) -> TransitionBatch:
    """Uniform sampling with replacement"""
    return buf.sample(batch_size, rng)


@dataclass
class AgentState:
    """Every learnable quantity of the agent plus its optimizer states"""
    actor: MlpParams
    critic1: MlpParams
    critic2: MlpParams
    target1: MlpParams
    target2: MlpParams
    log_temperature: float
    actor_opt: AdamState
    critic1_opt: AdamState
    critic2_opt: AdamState
    temperature_opt: AdamState
    state_dim: int
    action_dim: int

    @property
    def omega(self) -> float:
        return math.exp(self.log_temperature)


def init_agent(state_dim: int, action_dim: int, config: SacConfig, rng: np.random.Generator) -> AgentState:
    """
    Fresh actor, twin critics and target copies

    Args:
        state_dim: State width
        action_dim: Action width
        config: SAC hyperparameters
        rng: Generator used for weight initialization

    Returns:
        AgentState
    """
    actor = init_mlp(state_dim, 2 * action_dim, rng, config.hidden_sizes, output_scale=3e-3)
    critic1 = init_mlp(state_dim + action_dim, 1, rng, config.hidden_sizes)
    critic2 = init_mlp(state_dim + action_dim, 1, rng, config.hidden_sizes)
    log_t = math.log(config.initial_temperature)
    lr = config.learning_rate
    return AgentState(
        actor=actor,
        critic1=critic1,
        critic2=critic2,
        target1=critic1.copy(),
        target2=critic2.copy(),
        log_temperature=log_t,
        actor_opt=adam_init(actor, lr),
        critic1_opt=adam_init(critic1, lr),
        critic2_opt=adam_init(critic2, lr),
        temperature_opt=adam_init([np.zeros(1)], lr),
        state_dim=state_dim,
        action_dim=action_dim,
    )


def q_values(critic: MlpParams, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
    return mlp_forward(critic, np.concatenate([states, actions], axis=1))[:, 0]


def sample_actions(actor: MlpParams, states: np.ndarray, noise: np.ndarray):
    """(actions, log_probs, policy output, raw actor output) for a batch of states"""
    raw = mlp_forward(actor, states)
    out = split_policy_output(raw)
    actions, log_probs = policy_sample(out, noise)
    return actions, log_probs, out, raw


def critic_targets(agent: AgentState, batch: TransitionBatch, noise: np.ndarray, discount: float) -> np.ndarray:
    """
    Soft Bellman targets r + gamma*(1-done)*[min_j Qbar_j(s', a') - omega*log pi(a'|s')]

    The bootstrap term is only computed for transitions that are not done,
    so done rows get exactly r.
    """
    y = batch.rewards.astype(float).copy()
    live = batch.dones < 0.5
    if np.any(live):
        s2 = batch.next_states[live]
        a2, logp2, _, _ = sample_actions(agent.actor, s2, noise[live])
        q_next = np.minimum(q_values(agent.target1, s2, a2), q_values(agent.target2, s2, a2))
        y[live] = y[live] + discount * (q_next - agent.omega * logp2)
    return y


def critic_loss_and_grads(critic: MlpParams, batch: TransitionBatch, targets: np.ndarray) -> Tuple[float, MlpGradients]:
    """Mean of 0.5*(Q(s, a) - y)**2 and its parameter gradients"""
    inputs = np.concatenate([batch.states, batch.actions], axis=1)
    q = mlp_forward(critic, inputs)[:, 0]
    err = q - targets
    loss = float(0.5 * np.mean(err * err))
    grads = backward(critic, inputs, (err / len(err))[:, None])
    return loss, grads


def critic_update(agent: AgentState, batch: TransitionBatch, rng: np.random.Generator,
                  discount: float) -> Tuple[AgentState, Tuple[float, float]]:
    """
    One optimizer step on each critic toward the shared soft targets

    Returns:
        (updated agent, (loss of critic 1, loss of critic 2))
    """
    if len(batch) == 0:
        raise ValueError("critic_update needs a nonempty batch")
    noise = rng.standard_normal((len(batch), agent.action_dim))
    y = critic_targets(agent, batch, noise, discount)
    loss1, g1 = critic_loss_and_grads(agent.critic1, batch, y)
    loss2, g2 = critic_loss_and_grads(agent.critic2, batch, y)
    critic1, opt1 = adam_step(agent.critic1_opt, agent.critic1, g1)
    critic2, opt2 = adam_step(agent.critic2_opt, agent.critic2, g2)
    updated = dataclasses.replace(agent, critic1=critic1, critic2=critic2, critic1_opt=opt1, critic2_opt=opt2)
    return updated, (loss1, loss2)


def actor_loss_and_grads(agent: AgentState, states: np.ndarray,
                         noise: np.ndarray) -> Tuple[float, MlpGradients, np.ndarray]:
    """
    Mean of omega*log pi(a|s) - min_j Q_j(s, a) with a reparameterized

    Returns:
        (loss, actor gradients, per-sample log_probs)
    """
    n, sd = states.shape
    actions, log_probs, out, raw = sample_actions(agent.actor, states, noise)
    inputs = np.concatenate([states, actions], axis=1)
    q1 = mlp_forward(agent.critic1, inputs)[:, 0]
    q2 = mlp_forward(agent.critic2, inputs)[:, 0]
    pick1 = q1 <= q2
    q_min = np.where(pick1, q1, q2)
    omega = agent.omega
    loss = float(np.mean(omega * log_probs - q_min))

    # d(-Q_min)/d(action) through whichever critic is smaller per sample
    up1 = np.where(pick1, -1.0 / n, 0.0)[:, None]
    up2 = np.where(pick1, 0.0, -1.0 / n)[:, None]
    d_inputs = backward(agent.critic1, inputs, up1).inputs + backward(agent.critic2, inputs, up2).inputs
    d_action = d_inputs[:, sd:]
    d_log_prob = np.full(n, omega / n)

    d_mean, d_log_std = policy_sample_backward(out, noise, d_action, d_log_prob)
    d_raw = policy_output_backward(raw, d_mean, d_log_std)
    return loss, backward(agent.actor, states, d_raw), log_probs


def actor_update(agent: AgentState, batch: TransitionBatch,
                 rng: np.random.Generator) -> Tuple[AgentState, float, np.ndarray]:
    """
    One optimizer step on the actor only

    Returns:
        (updated agent, loss, log_probs of the sampled actions)
    """
    if len(batch) == 0:
        raise ValueError("actor_update needs a nonempty batch")
    noise = rng.standard_normal((len(batch), agent.action_dim))
    loss, grads, log_probs = actor_loss_and_grads(agent, batch.states, noise)
    actor, opt = adam_step(agent.actor_opt, agent.actor, grads)
    return dataclasses.replace(agent, actor=actor, actor_opt=opt), loss, log_probs


def temperature_loss_and_grad(log_temperature: float, log_probs: np.ndarray,
                              target_entropy: float) -> Tuple[float, float]:
    """
    Mean of -omega*log pi - omega*H_target and its derivative in log(omega)

    Stationary exactly when the entropy estimate -mean(log pi) equals the target.
    """
    omega = math.exp(log_temperature)
    slack = float(np.mean(-np.asarray(log_probs) - target_entropy))
    return omega * slack, omega * slack


def temperature_update(agent: AgentState, batch: TransitionBatch, target_entropy: float,
                       rng: Optional[np.random.Generator] = None,
                       log_probs: Optional[np.ndarray] = None) -> Tuple[AgentState, float]:
    """
    One optimizer step on log(omega)

    Args:
        agent: Agent
        batch: Batch whose states are used
        target_entropy: Entropy lower bound, -action_dim by default
        rng: Used to sample fresh actions when log_probs is not given
        log_probs: Log-probabilities already sampled by the actor update

    Returns:
        (updated agent, loss)
    """
    if len(batch) == 0:
        raise ValueError("temperature_update needs a nonempty batch")
    if log_probs is None:
        if rng is None:
            raise ValueError("temperature_update needs rng or log_probs")
        noise = rng.standard_normal((len(batch), agent.action_dim))
        _, log_probs, _, _ = sample_actions(agent.actor, batch.states, noise)
    loss, grad = temperature_loss_and_grad(agent.log_temperature, log_probs, target_entropy)
    (new_log_t,), opt = adam_step(agent.temperature_opt, [np.array([agent.log_temperature])], [np.array([grad])])
    return dataclasses.replace(agent, log_temperature=float(new_log_t[0]), temperature_opt=opt), loss


def _blend(online: MlpParams, target: MlpParams, tau: float) -> MlpParams:
    return MlpParams.from_arrays([tau * p + (1.0 - tau) * t for p, t in zip(online.arrays(), target.arrays())])


def soft_update(agent: AgentState, tau: float) -> AgentState:
    """Polyak averaging of both target critics: target <- tau*online + (1-tau)*target"""
    return dataclasses.replace(
        agent,
        target1=_blend(agent.critic1, agent.target1, tau),
        target2=_blend(agent.critic2, agent.target2, tau),
    )


def sac_update(agent: AgentState, batch: TransitionBatch, rng: np.random.Generator,
               config: SacConfig) -> Tuple[AgentState, Dict[str, float]]:
    """Critic, actor, temperature and target updates on one batch"""
    agent, (c1, c2) = critic_update(agent, batch, rng, config.discount)
    agent, a_loss, log_probs = actor_update(agent, batch, rng)
    agent, t_loss = temperature_update(agent, batch, config.entropy_target(agent.action_dim), log_probs=log_probs)
    agent = soft_update(agent, config.tau)
    return agent, {"critic_loss": 0.5 * (c1 + c2), "actor_loss": a_loss, "temperature_loss": t_loss}


def greedy_action(agent: AgentState, state: np.ndarray) -> np.ndarray:
    """Deterministic action tanh(mean)"""
    out = split_policy_output(mlp_forward(agent.actor, state))
    return np.tanh(out.mean)


def greedy_deployment(agent: AgentState, env: DeploymentEnv, state: np.ndarray) -> Deployment:
    return env.decode(greedy_action(agent, state))


@dataclass
class LearningCurvePoint:
    step: int
    eval_reward: float
    train_reward: float
    actor_loss: float
    critic_loss: float
    omega: float


def evaluate_greedy(agent: AgentState, env: DeploymentEnv, seed_seq: np.random.SeedSequence,
                    episodes: int) -> float:
    """
    Mean reporting-scale objective of the greedy policy

    A separate environment instance and a generator rebuilt from seed_seq keep
    every evaluation on the same UE draws without touching the training env.
    """
    eval_env = DeploymentEnv(env.config)
    rng = np.random.default_rng(seed_seq)
    values = []
    for _ in range(episodes):
        state = eval_env.reset(rng)
        deployment = greedy_deployment(agent, eval_env, state)
        values.append(evaluate(deployment, eval_env.ues, eval_env.trajectory_points,
                               env.config.objective).objective_value)
    return float(np.mean(values))


def train(env: DeploymentEnv, config: SacConfig,
          progress: bool = False) -> Tuple[AgentState, List[LearningCurvePoint]]:
    """
    Train a SAC agent on the deployment environment

    Args:
        env: Deployment environment
        config: SAC hyperparameters (config.seed drives every random stream)
        progress: Show a tqdm progress bar

    Returns:
        (trained agent, learning curve with one point per evaluation); with
        config.keep_best the agent is the snapshot whose greedy evaluation
        scored highest (earliest on ties) instead of the final weights
    """
    init_seq, env_seq, act_seq, update_seq, eval_seq = np.random.SeedSequence(config.seed).spawn(5)
    agent = init_agent(env.state_dim, env.action_dim, config, np.random.default_rng(init_seq))
    curve: List[LearningCurvePoint] = []
    if config.total_steps == 0:
        return agent, curve

    env_rng = np.random.default_rng(env_seq)
    act_rng = np.random.default_rng(act_seq)
    update_rng = np.random.default_rng(update_seq)
    buffer = ReplayBuffer(config.buffer_capacity, env.state_dim, env.action_dim)

    logger.info("Training SAC: %d steps, state_dim=%d, action_dim=%d, lr=%g, batch=%d",
                config.total_steps, env.state_dim, env.action_dim, config.learning_rate, config.batch_size)

    state = env.reset(env_rng)
    best_agent, best_eval, best_step = agent, -math.inf, 0
    rewards_since_eval: List[float] = []
    last_stats = {"actor_loss": float("nan"), "critic_loss": float("nan")}
    for step in tqdm(range(1, config.total_steps + 1), disable=not progress, desc="SAC", unit="step"):
        if step <= config.warmup_steps:
            action = act_rng.uniform(-1.0, 1.0, size=env.action_dim)
        else:
            out = split_policy_output(mlp_forward(agent.actor, state))
            action, _ = policy_sample(out, act_rng.standard_normal(env.action_dim))

        reward, next_state, done = env.step(state, action, env_rng)
        buffer_push(buffer, Transition(state, np.asarray(action), reward, next_state, done))
        rewards_since_eval.append(reward)
        state = next_state

        if step > config.warmup_steps and step % config.update_every == 0 and len(buffer) >= config.batch_size:
            for _ in range(config.gradient_steps):
                batch = buffer_sample(buffer, config.batch_size, update_rng)
                agent, last_stats = sac_update(agent, batch, update_rng, config)
            logger.debug("step %d: critic_loss=%.6g actor_loss=%.6g omega=%.6g",
                         step, last_stats["critic_loss"], last_stats["actor_loss"], agent.omega)

        if config.eval_every and (step % config.eval_every == 0 or step == config.total_steps):
            eval_reward = evaluate_greedy(agent, env, eval_seq, config.eval_episodes)
            point = LearningCurvePoint(
                step=step,
                eval_reward=eval_reward,
                train_reward=float(np.mean(rewards_since_eval)),
                actor_loss=float(last_stats["actor_loss"]),
                critic_loss=float(last_stats["critic_loss"]),
                omega=agent.omega,
            )
            curve.append(point)
            rewards_since_eval = []
            if eval_reward > best_eval:
                best_agent, best_eval, best_step = agent, eval_reward, step
            logger.info("step %d: eval_reward=%.6g train_reward=%.6g omega=%.4g",
                        step, point.eval_reward, point.train_reward, point.omega)

    if config.keep_best and curve:
        logger.info("Keeping the step %d weights (eval_reward=%.6g)", best_step, best_eval)
        return best_agent, curve
    return agent, curve


def save_checkpoint(agent: AgentState, config: SacConfig) -> Dict[str, Any]:
    """JSON-ready checkpoint: every network with shape headers plus the config echo"""
    return {
        "sac_config": dataclasses.asdict(config),
        "state_dim": agent.state_dim,
        "action_dim": agent.action_dim,
        "log_temperature": agent.log_temperature,
        "actor": params_to_dict(agent.actor),
        "critic1": params_to_dict(agent.critic1),
        "critic2": params_to_dict(agent.critic2),
        "target1": params_to_dict(agent.target1),
        "target2": params_to_dict(agent.target2),
    }


def load_checkpoint(doc: Dict[str, Any]) -> Tuple[AgentState, SacConfig]:
    """Rebuild an agent from save_checkpoint output; optimizer moments start fresh"""
    cfg = dict(doc["sac_config"])
    cfg["hidden_sizes"] = tuple(cfg["hidden_sizes"])
    config = SacConfig(**cfg)
    nets = {k: params_from_dict(doc[k]) for k in ("actor", "critic1", "critic2", "target1", "target2")}
    lr = config.learning_rate
    agent = AgentState(
        **nets,
        log_temperature=float(doc["log_temperature"]),
        actor_opt=adam_init(nets["actor"], lr),
        critic1_opt=adam_init(nets["critic1"], lr),
        critic2_opt=adam_init(nets["critic2"], lr),
        temperature_opt=adam_init([np.zeros(1)], lr),
        state_dim=int(doc["state_dim"]),
        action_dim=int(doc["action_dim"]),
    )
    return agent, config
