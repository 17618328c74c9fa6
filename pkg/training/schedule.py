# training/schedule.py
import math

from errors import InputDomainError
from model import LrSchedule


def lr_at(schedule: LrSchedule, epoch: int) -> float:
    """주기적 코사인 어닐링 (warm restart).

    horizon을 cycles개 구간으로 나누고, 각 구간 앞쪽 warmup_fraction 동안 시작값에서
    peak·γ^k까지 선형 증가한 뒤 end까지 코사인 감소한다. 첫 구간은 initial,
    이후 구간은 end에서 다시 시작한다.
    """
    if not 0 <= epoch < schedule.horizon:
        raise InputDomainError(f"epoch {epoch} outside schedule horizon [0, {schedule.horizon})")

    cycle_len = schedule.horizon / schedule.cycles
    k = min(int(epoch // cycle_len), schedule.cycles - 1)
    local = epoch - k * cycle_len
    peak = schedule.peak * schedule.gamma**k
    start = schedule.initial if k == 0 else schedule.end
    warmup = schedule.warmup_fraction * cycle_len

    if local < warmup:
        return start + (peak - start) * local / warmup
    progress = (local - warmup) / (cycle_len - warmup)
    return schedule.end + 0.5 * (peak - schedule.end) * (1.0 + math.cos(math.pi * progress))
