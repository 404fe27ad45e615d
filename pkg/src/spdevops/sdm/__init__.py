from .aggregation import AggregationSpec, AggregatorState, Combine, TriggerEvent, aggregate_step
from .broker import BrokerTree, Envelope, Scope, UnknownClient, broker_route
from .monitors import MonitorHandle, MonitorRegistry, UnknownNode, deploy_monitor
from .ratemon import RateEstimate, RateMon, RateSample, ShortWindow, ratemon_update, tail_risk
