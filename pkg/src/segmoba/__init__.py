"""Longest-prefix matching with segmented multilayer balanced trees."""
from .baselines import LengthIndex, LinearTable, Treap, brute_force_min_cost, linear_lookup
from .engine import EngineStats, SegMobaTree, SegmentTable, build
from .mobatree import AccessCounter, MobaNode, MobaTree, moba_lookup, moba_validate
from .prefix import (AddrRange, NotFound, ParseError, Prefix, PrefixError, PrefixRelation, Rule, RuleSet,
                     parse_ruleset, prefix_range, prefix_relation, reduce_prefix, serialize_ruleset)
from .segmentation import (CostMatrix, LengthHistogram, Segment, SplitTable, build_cost_matrix, dp_split,
                           hash_cost, plan_cost, tree_cost)

__version__ = "0.1.0"
