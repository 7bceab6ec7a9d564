"""LiDAR-aided mmWave beam prediction and tracking."""
from .beam import (BeamCodebook, SignalConfig, array_response, generate_codebook,
                   measure_power_vector, optimal_beam_index, receive_power)
from .evalkit import (AccuracyTable, OpWindowCurve, evaluate_table, operation_window_eval,
                      topk_accuracy, training_overhead)
from .scene import ScenarioConfig, SequenceRecord, generate_dataset
from .tracker import (TrackerConfig, TrackerParams, TrainConfig, TrainingSample,
                      predict_topk, tracker_forward, tracker_loss, train)

__version__ = "0.1.0"
