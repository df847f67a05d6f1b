"""Synthetic closed-loop simulation."""
from .episode import EpisodeLog, StepRecord, route, run_episode
from .scenario import Scenario, SimConfig, dump_scenario, load_scenario, parse_scenario, pipeline_config
from .world import (ConvexPolygon, Disc, DynamicAgent, LocalizationModel, SensorModel, World,
                    inject_osm_bias, localize, raycast_scan, step_vehicle)
