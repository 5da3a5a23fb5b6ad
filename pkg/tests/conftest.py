import numpy as np
import pytest

from graspqd.core import BehaviorVector, Genome, Individual
from graspqd.grasp_env import (
    EnvConfig,
    GripperConfig,
    ObjectConfig,
    PlanarArmEnv,
    ToleranceConfig,
)


@pytest.fixture(scope="session")
def default_env():
    return PlanarArmEnv(EnvConfig())


@pytest.fixture(scope="session")
def easy_env_config():
    """Short episodes, fat disc, wide mouth: touches and grasps show up fast
    in smoke-scale runs."""
    return EnvConfig(
        timesteps=120,
        obj=ObjectConfig(radius=0.09),
        gripper=GripperConfig(finger_length=0.22, max_aperture=0.36, close_speed=0.06),
        tolerances=ToleranceConfig(contact_eps=0.02, penetration_max=0.06,
                                   lift_height_min=0.03, touch_window_steps=15),
    )


@pytest.fixture()
def easy_env(easy_env_config):
    return PlanarArmEnv(easy_env_config)


def make_individual(eval_id, components, novelty=None, success=False, quality=0.0,
                    generation=0, genome_dim=4):
    """Bare individual for selection/novelty unit tests."""
    behavior = BehaviorVector(components=tuple(components))
    if novelty is None:
        novelty = tuple(None if c is None else float("inf") for c in behavior.components)
    return Individual(
        genome=Genome(np.zeros(genome_dim)),
        behavior=behavior,
        novelty=tuple(novelty),
        success=success,
        quality=quality,
        eval_id=eval_id,
        generation_born=generation,
    )
