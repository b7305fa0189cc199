"""
모델 서비스

CNN 학습(SGD + momentum), 평가, 체크포인트 기반 추론과
설명용 접근자(forward_with_capture, logit_gradients)를 제공합니다.

그래프 인스턴스는 호출마다 새로 만들어 파라미터만 공유하므로,
학습이 끝난(freeze 된) 체크포인트에 대한 호출은 스레드 간에 안전합니다.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.logging_config import log_data_flow, log_step

from ..config import ArchitectureConfig, TrainConfig
from ..engine import ComputeGraph, cross_entropy_loss, softmax
from ..exceptions import ServiceError, TrainingDivergenceError, ValidationError
from ..models import ArchitectureSpec, Checkpoint, Dataset, TrainingMetadata, validation_architecture

# 로깅 설정
logger = logging.getLogger(__name__)

DEFAULT_INFERENCE_BATCH = 64


@dataclass
class EvaluationResult:
    """평가 결과: 클래스별 정확도와 혼동 행렬 (행 = 실제, 열 = 예측)"""

    class_names: List[str]
    per_class_accuracy: List[float]
    confusion: np.ndarray
    accuracy: float
    counts: List[int] = field(default_factory=list)

    def to_dict(self) -> Dict[str, object]:
        return {
            "class_names": self.class_names,
            "per_class_accuracy": self.per_class_accuracy,
            "confusion": self.confusion.tolist(),
            "accuracy": self.accuracy,
            "counts": self.counts,
        }


def build_architecture(config: ArchitectureConfig, image_size: int, class_names: Sequence[str]) -> ArchitectureSpec:
    """실험 설정으로부터 검증용 구조 생성"""
    return validation_architecture(
        conv_channels=list(config.conv_channels),
        image_size=image_size,
        num_classes=len(class_names),
        class_names=list(class_names),
        kernel_size=config.kernel_size,
        pool_after=list(config.pool_after),
        use_bias=config.use_bias,
    )


def _as_batch(images: np.ndarray) -> np.ndarray:
    arr = np.asarray(images, dtype=np.float64)
    return arr[None, ...] if arr.ndim == 3 else arr


class ModelService:
    """
    모델 학습/추론 서비스

    Args:
        log_every: 학습 로그를 남길 epoch 간격
        inference_batch: 추론/캡처 시 배치 크기
    """

    def __init__(self, log_every: int = 1, inference_batch: int = DEFAULT_INFERENCE_BATCH):
        self.log_every = max(int(log_every), 1)
        self.inference_batch = max(int(inference_batch), 1)

    # ------------------------------------------------------------------
    # 학습
    # ------------------------------------------------------------------

    def train(
        self,
        arch: ArchitectureSpec,
        train_set: Dataset,
        val_set: Optional[Dataset],
        cfg: TrainConfig,
        model_id: str = "model",
    ) -> Checkpoint:
        """
        SGD + momentum 학습

        seed 가 파라미터 초기화와 셔플 순서를 모두 고정하므로 같은 입력이면
        비트 단위로 같은 체크포인트가 나옵니다.

        Raises:
            ValidationError: 빈 데이터셋, 레이블 범위/shape 불일치
            TrainingDivergenceError: 손실이 NaN/Inf 가 된 경우
        """
        self._validate_dataset(arch, train_set, "train_set")
        if val_set is not None and len(val_set) > 0:
            self._validate_dataset(arch, val_set, "val_set")

        logger.info(
            "학습 시작: model=%s, 이미지 %d장, epochs=%d, lr=%g, momentum=%g, batch=%d, seed=%d",
            model_id,
            len(train_set),
            cfg.epochs,
            cfg.learning_rate,
            cfg.momentum,
            cfg.batch_size,
            cfg.seed,
        )
        params = arch.init_params(cfg.seed)
        graph = arch.build_graph(params)
        velocity = {name: np.zeros_like(value) for name, value in graph.params.items()}
        shuffle_rng = np.random.default_rng([cfg.seed, 1])
        n = len(train_set)
        loss_history: List[float] = []

        for epoch in range(1, cfg.epochs + 1):
            order = shuffle_rng.permutation(n)
            total_loss = 0.0
            for start in range(0, n, cfg.batch_size):
                idx = order[start : start + cfg.batch_size]
                logits = graph.forward(train_set.images[idx])
                loss, dlogits = cross_entropy_loss(logits, train_set.labels[idx])
                if not math.isfinite(loss):
                    raise TrainingDivergenceError(
                        f"epoch {epoch} 에서 손실이 발산했습니다 (loss={loss})",
                        epoch=epoch,
                        learning_rate=cfg.learning_rate,
                    )
                grads = graph.parameter_gradients(graph.output_index, dlogits)
                for name, grad in grads.items():
                    velocity[name] = cfg.momentum * velocity[name] - cfg.learning_rate * grad
                    graph.params[name] = graph.params[name] + velocity[name]
                total_loss += loss * len(idx)

            epoch_loss = total_loss / n
            if not math.isfinite(epoch_loss):
                raise TrainingDivergenceError(
                    f"epoch {epoch} 평균 손실이 유한하지 않습니다", epoch=epoch, learning_rate=cfg.learning_rate
                )
            loss_history.append(epoch_loss)
            if epoch % self.log_every == 0 or epoch == cfg.epochs:
                logger.info("epoch %d/%d: loss=%.6f", epoch, cfg.epochs, epoch_loss)

        params = {name: graph.params[name] for name in arch.param_shapes()}
        provisional = Checkpoint(
            architecture=arch,
            params=params,
            metadata=TrainingMetadata(
                seed=cfg.seed,
                epochs=cfg.epochs,
                learning_rate=cfg.learning_rate,
                momentum=cfg.momentum,
                batch_size=cfg.batch_size,
                loss_history=loss_history,
                model_id=model_id,
            ),
        ).freeze()

        train_acc = self.evaluate(provisional, train_set).accuracy
        val_acc = self.evaluate(provisional, val_set).accuracy if val_set is not None and len(val_set) else 0.0
        provisional.metadata.final_train_accuracy = train_acc
        provisional.metadata.final_val_accuracy = val_acc
        logger.info("학습 완료: model=%s, train_acc=%.4f, val_acc=%.4f", model_id, train_acc, val_acc)
        return provisional

    def _validate_dataset(self, arch: ArchitectureSpec, dataset: Dataset, field_name: str) -> None:
        if len(dataset) == 0:
            raise ValidationError(f"{field_name} 가 비어 있습니다", field_name=field_name)
        if tuple(dataset.image_shape) != tuple(arch.input_shape):
            raise ValidationError(
                f"{field_name} 이미지 shape {dataset.image_shape} 이 구조 입력 {arch.input_shape} 와 다릅니다",
                field_name=field_name,
                validation_rule="input_shape",
            )
        if dataset.labels.max() >= arch.num_classes:
            raise ValidationError(
                f"{field_name} 레이블이 클래스 수({arch.num_classes})를 넘습니다", field_name=field_name, validation_rule="label_range"
            )

    # ------------------------------------------------------------------
    # 추론 / 평가
    # ------------------------------------------------------------------

    def predict_logits(self, model: Checkpoint, images: np.ndarray, graph: Optional[ComputeGraph] = None) -> np.ndarray:
        """(N, H, W, 3) -> (N, C) logits"""
        batch = _as_batch(images)
        g = graph or model.build_graph()
        outputs = [g.forward(batch[i : i + self.inference_batch]) for i in range(0, len(batch), self.inference_batch)]
        if not outputs:
            return np.zeros((0, model.num_classes))
        return np.concatenate(outputs, axis=0)

    def predict_proba(self, model: Checkpoint, images: np.ndarray) -> np.ndarray:
        return softmax(self.predict_logits(model, images))

    def evaluate(self, model: Checkpoint, dataset: Dataset) -> EvaluationResult:
        """클래스별 정확도와 혼동 행렬"""
        num_classes = model.num_classes
        confusion = np.zeros((num_classes, num_classes), dtype=np.int64)
        if len(dataset):
            predictions = self.predict_logits(model, dataset.images).argmax(axis=1)
            np.add.at(confusion, (dataset.labels, predictions), 1)
        counts = confusion.sum(axis=1)
        per_class = [float(confusion[c, c] / counts[c]) if counts[c] else 0.0 for c in range(num_classes)]
        total = int(counts.sum())
        accuracy = float(np.trace(confusion) / total) if total else 0.0
        logger.debug("평가 완료: %s, accuracy=%.4f, per_class=%s", dataset.name, accuracy, per_class)
        return EvaluationResult(
            class_names=list(dataset.class_names),
            per_class_accuracy=per_class,
            confusion=confusion,
            accuracy=accuracy,
            counts=counts.tolist(),
        )

    # ------------------------------------------------------------------
    # 설명용 접근자
    # ------------------------------------------------------------------

    def _check_layers(self, model: Checkpoint, layers: Sequence[str]) -> None:
        explainable = model.architecture.explainable_layers()
        unknown = [layer for layer in layers if layer not in explainable]
        if unknown:
            raise ValidationError(
                f"설명할 수 없는 레이어: {unknown} (가능: {explainable})",
                field_name="layers",
                field_value=unknown,
                validation_rule="explainable_layer",
            )

    def _check_class(self, model: Checkpoint, class_index: int) -> None:
        if not 0 <= int(class_index) < model.num_classes:
            raise ValidationError(
                f"클래스 인덱스 {class_index} 가 범위를 벗어났습니다 (클래스 {model.num_classes}개)",
                field_name="class_index",
                field_value=class_index,
                validation_rule="class_range",
            )

    def forward_with_capture(
        self, model: Checkpoint, image: np.ndarray, layers: Sequence[str], graph: Optional[ComputeGraph] = None
    ) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
        """
        단일 이미지 forward + 레이어 활성값 캡처

        Returns:
            (logits (C,), layer -> H×W×K 활성값)
        """
        self._check_layers(model, layers)
        g = graph or model.build_graph()
        logits = g.forward(_as_batch(image))
        captured = {name: value[0].copy() for name, value in g.outputs(layers).items()}
        log_step(logger, "forward_with_capture", f"layers={list(layers)}")
        return logits[0].copy(), captured

    def capture_batch(self, model: Checkpoint, images: np.ndarray, layer: str) -> np.ndarray:
        """여러 이미지의 레이어 활성값 (N, H, W, K), 입력 순서 유지"""
        self._check_layers(model, [layer])
        batch = _as_batch(images)
        if len(batch) == 0:
            raise ValidationError("이미지가 비어 있습니다", field_name="images")
        g = model.build_graph()
        chunks = []
        for i in range(0, len(batch), self.inference_batch):
            g.forward(batch[i : i + self.inference_batch])
            chunks.append(g.node(layer).output.copy())
        return np.concatenate(chunks, axis=0)

    def _one_hot_seed(self, rows: int, num_classes: int, class_index: int) -> np.ndarray:
        seed = np.zeros((rows, num_classes))
        seed[:, class_index] = 1.0
        return seed

    def logit_gradients(
        self,
        model: Checkpoint,
        image: np.ndarray,
        layer: str,
        class_index: int,
        graph: Optional[ComputeGraph] = None,
    ) -> np.ndarray:
        """레이어 출력에 대한 class_index logit(softmax 이전)의 gradient (H×W×K)"""
        self._check_layers(model, [layer])
        self._check_class(model, class_index)
        g = graph or model.build_graph()
        g.forward(_as_batch(image))
        grads = g.backward(g.output_index, layer, seed=self._one_hot_seed(1, model.num_classes, class_index))
        log_data_flow(logger, f"logit_gradients[{layer}, class={class_index}]", grads[0])
        return grads[0]

    def gradients_batch(self, model: Checkpoint, images: np.ndarray, layer: str, class_index: int) -> np.ndarray:
        """여러 이미지의 logit gradient (N, H, W, K); 배치 행은 서로 독립"""
        self._check_layers(model, [layer])
        self._check_class(model, class_index)
        batch = _as_batch(images)
        g = model.build_graph()
        chunks = []
        for i in range(0, len(batch), self.inference_batch):
            part = batch[i : i + self.inference_batch]
            g.forward(part)
            seed = self._one_hot_seed(len(part), model.num_classes, class_index)
            chunks.append(g.backward(g.output_index, layer, seed=seed))
        if not chunks:
            raise ServiceError("gradient 를 계산할 이미지가 없습니다", service_name="ModelService", operation="gradients_batch")
        return np.concatenate(chunks, axis=0)
