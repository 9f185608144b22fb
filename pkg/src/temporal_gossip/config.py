#!/usr/bin/env python3
"""
Runtime settings for the temporal gossip simulator
"""

from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

# Repository root, two levels above the package directory.
PROJECT_ROOT = Path(__file__).parent.parent.parent


class SimulationSettings(BaseSettings):
    """
    Simulator runtime settings.
    Loaded from a .env file and GOSSIP_SIM_* environment variables. Experiment
    parameters live in ExperimentConfig, not here.
    """

    # --- Logging ---
    log_level: str = Field(default="INFO", description="Root logging level")
    progress_every: int = Field(
        default=1000, ge=1, description="Epochs between progress log lines"
    )

    # --- Execution ---
    max_workers: int = Field(
        default=1,
        ge=1,
        description="Processes used for sweep points and tuning trials (1 = sequential)",
    )
    validate_graph: bool = Field(
        default=False,
        description="Check TemporalGraph invariants after every dynamics step",
    )
    run_slow: bool = Field(
        default=False, description="Run the full-scale acceptance tests"
    )

    model_config = SettingsConfigDict(
        env_prefix="GOSSIP_SIM_",
        env_file=PROJECT_ROOT / ".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )


# --- Singleton Settings Instance ---
settings = SimulationSettings()
