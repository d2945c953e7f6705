"""
Command executor for the AP deployment optimizer
Routes commands to the experiment pipelines
"""

import logging
from typing import Any, Dict, List

from operations import experiment_ops
from operations.baseline_ops import BudgetExceededError
from operations.sac_ops import InsufficientDataError
from operations.scenario_ops import ConfigError, DeploymentError

logger = logging.getLogger(__name__)

ACTIONS = ("evaluate", "train", "oracle", "compare", "sweep")


class ExecutionError(Exception):
    """Custom exception for execution errors"""
    pass


def error_category(e: Exception) -> str:
    """Map an exception onto config / io / budget / data / internal"""
    if isinstance(e, BudgetExceededError):
        return "budget"
    if isinstance(e, InsufficientDataError):
        return "data"
    if isinstance(e, (ConfigError, DeploymentError, ExecutionError)):
        return "config"
    if isinstance(e, OSError):
        return "io"
    return "internal"


class Executor:
    """Executes structured experiment commands"""

    def __init__(self, out_dir: str = "runs", progress: bool = False):
        """
        Initialize executor

        Args:
            out_dir: Default output directory
            progress: Show progress bars in long-running commands
        """
        self.out_dir = out_dir
        self.progress = progress
        self.history: List[Dict[str, Any]] = []

    def execute(self, command: Dict[str, Any]) -> Dict[str, Any]:
        """
        Execute a command

        Args:
            command: {"action": ..., "parameters": {...}}

        Returns:
            dict: Execution result with status, message and category
        """
        action = command.get("action")
        parameters = dict(command.get("parameters", {}))
        parameters.setdefault("out_dir", self.out_dir)

        try:
            if not action:
                raise ExecutionError("No action specified in command")
            if action not in ACTIONS:
                raise ExecutionError(f"Unsupported action: {action}. Use: {list(ACTIONS)}")

            result = self._dispatch(action, parameters)

            self.history.append({
                "action": action,
                "parameters": parameters,
                "status": "success"
            })
            return {
                "status": "success",
                "message": f"Successfully executed: {action}",
                "action": action,
                "category": None,
                "outputs": list(result.manifest.outputs),
                "out_dir": str(parameters["out_dir"]),
                "result": result.payload,
            }

        except Exception as e:
            category = error_category(e)
            if category == "internal":
                logger.exception("Unexpected failure in %s", action)
            self.history.append({
                "action": action,
                "parameters": parameters,
                "status": "error"
            })
            return {
                "status": "error",
                "message": f"Execution failed: {e}",
                "action": action,
                "category": category,
                "error_detail": str(e)
            }

    def _dispatch(self, action: str, params: dict) -> experiment_ops.CommandResult:
        if action in ("train", "compare", "sweep"):
            params.setdefault("progress", self.progress)
        if action == "evaluate":
            return experiment_ops.cmd_evaluate(**params)
        elif action == "train":
            return experiment_ops.cmd_train(**params)
        elif action == "oracle":
            return experiment_ops.cmd_oracle(**params)
        elif action == "compare":
            return experiment_ops.cmd_compare(**params)
        elif action == "sweep":
            return experiment_ops.cmd_sweep(**params)
        raise ExecutionError(f"Unknown action: {action}")
