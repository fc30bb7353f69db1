"""Continual learning for temporal knowledge graph reasoning with
generative replay of historical entity distributions."""

__version__ = "0.1.0"

from .config import TrainConfig
from .data import (FactSet, Snapshot, Task, TaskStream, Vocabulary, add_inverse,
                   build_task_stream, load_dataset, load_quadruples)
from .diffusion import (ConditionedLatent, DenoiserParams, GuidanceScorer,
                        NoiseSchedule, aggregate_replay, continual_update_dm,
                        denoise_step, forward_noise, guided_reverse, init_denoiser,
                        pretrain, reverse_sample)
from .metrics import (MetricsMatrix, evaluate_stream, forgetting_score, hits_at_k,
                      mrr, rank_query)
from .prompts import (HistoryPrompt, ReplaySet, build_prompt, collect_replay_entities,
                      sample_prompts)
from .reasoner import (ReasonerParams, RepresentationStack, evolve, init_reasoner,
                       rgcn_layer, score)
from .replay import ReplayInjection, inject_final, inject_layer
from .toy import generate_toy_quads
from .trainer import (ReservoirBuffer, RunResult, loss_current, loss_total,
                      run_stream, train_task)
