"""Random projection forests with query modification toward the neighbour centroid."""
from .candidates import CandidateQueue, MergeStats, current_estimate, merge_candidates, new_queue, top_k
from .core import DataMatrix, DegenerateVectorError, DimensionMismatchError
from .data import (GroundTruth, VectorFileError, brute_force_knn, gen_clustered_sphere,
                   gen_uniform_sphere, load_vectors, recall, save_vectors, split_queries)
from .forest import (Forest, QueryResult, build_forest, load_forest, loads_forest, dumps_forest,
                     query_mq, query_rp, save_forest)
from .hashing import (CompoundHash, HyperplaneHash, charikar_collision_probability, compound_code,
                      hash_bit, sample_hash)
from .rp_tree import RPTree, build_tree, route_to_leaf
from .special import regularized_incomplete_beta
from .stats import (CollisionMoments, KappaSample, SuperiorityParams, acp_closed_form, acp_monte_carlo,
                    centroid_optimality_check, chi_fit, clt_coordinate_experiment,
                    conditional_plane_moments, empirical_hash_covariance, kappa, offdiag_identity,
                    superiority_probability)

__version__ = "0.1.0"
