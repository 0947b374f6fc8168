from .schedule import build_schedule, LevelSchedule, ScheduleNode
from .network import ModelHyper, ModelParams, forward, predict
