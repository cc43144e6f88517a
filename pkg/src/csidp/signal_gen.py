"""Synthetic CSI window generator with controllable leakage channels.

Windows are complex [T x N_c] matrices built from four ingredients:

* a static multipath baseline whose per-subcarrier complex gains depend on
  the room id (two designated subcarriers per room get an extra boost),
* a Doppler path ``d_c * exp(j(2*pi*f_a*t + phi))`` whose center frequency
  encodes the activity class,
* a subject-specific per-subcarrier gain fingerprint (multiplicative,
  ``1 + fingerprint_scale * u`` with u in [-1, 1]) applied to the channel
  terms -- the deliberate identity leakage channel,
* additive white complex noise, plus rare broadband interference bursts
  that give every frequency bin a wide dynamic range (these bursts are what
  later makes min-max normalization map quiet bins near zero).

Room/subject/activity profiles are pure functions of the ids (not of the
seed), so different dataset seeds share the same "world"; all per-window
randomness (noise, phases, burst placement) is keyed by ``cfg.seed``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidArgument
from . import rngstream as rng


@dataclass(frozen=True)
class GenConfig:
    """Parameters of the synthetic CSI world and of one window draw."""

    num_subjects: int = 6
    num_rooms: int = 3
    num_activities: int = 4
    window_len: int = 448
    num_subcarriers: int = 8
    sample_rate: float = 500.0
    packet_loss_rate: float = 0.0
    noise_std: float = 0.05
    seed: int = 0

    # Shape of the leakage/task channels.  The default Doppler layout puts
    # each activity tone at the center of its own 8-bin frequency block for
    # the default STFT (500 Hz / 256 FFT); identity and room leak through
    # static-bin and ridge amplitude levels.  The interferer tones are
    # high-energy but class-independent: energy-proportional allocation
    # wastes budget on them, gradient-based allocation does not.
    doppler_base_hz: float = 23.4375      # bin 12 exactly
    doppler_step_hz: float = 15.625       # 8 bins per activity
    doppler_amp: float = 1.6
    static_amp: float = 0.9
    room_boost: float = 1.8
    fingerprint_scale: float = 0.1
    # bins 52, 76, 100: three tones in distinct blocks, each off in a
    # random 1 - duty fraction of windows so min-max normalization maps
    # the on state near 1 (high energy, zero task relevance)
    interferer_hz: tuple[float, ...] = (101.5625, 148.4375, 195.3125)
    interferer_amp: float = 1.1
    interferer_duty: float = 0.9
    burst_prob: float = 0.02
    burst_amp: float = 20.0
    respiration_activity: int = -1   # class id carrying the slow band, -1 = off
    respiration_band_hz: tuple[float, float] = (0.1, 0.7)
    respiration_amp: float = 1.0
    bystander: bool = False

    def __post_init__(self) -> None:
        if self.window_len < 256:
            raise InvalidArgument("window_len must be >= 256")
        if self.num_subcarriers < 4:
            raise InvalidArgument("num_subcarriers must be >= 4")
        if not 0.0 <= self.packet_loss_rate < 0.5:
            raise InvalidArgument("packet_loss_rate must be in [0, 0.5)")
        if min(self.num_subjects, self.num_rooms, self.num_activities) < 1:
            raise InvalidArgument("class counts must be positive")
        if self.sample_rate <= 0:
            raise InvalidArgument("sample_rate must be positive")
        if self.noise_std < 0:
            raise InvalidArgument("noise_std must be >= 0")


@dataclass
class CsiWindow:
    """One labeled complex CSI window."""

    samples: np.ndarray          # complex128 [T x N_c]
    timestamps: np.ndarray       # float64 [T], strictly increasing
    activity_label: int
    subject_id: int
    room_id: int
    member_flag: bool = False
    resp_rate_hz: float | None = None

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.complex128)
        self.timestamps = np.asarray(self.timestamps, dtype=np.float64)
        if self.samples.ndim != 2 or self.samples.shape[0] != self.timestamps.shape[0]:
            raise InvalidArgument("samples must be [T x N_c] aligned with timestamps")
        if not np.all(np.isfinite(self.samples.view(np.float64))):
            raise InvalidArgument("samples must be finite")
        if self.timestamps.size >= 2 and not np.all(np.diff(self.timestamps) > 0):
            raise InvalidArgument("timestamps must be strictly increasing")

    @property
    def num_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def num_subcarriers(self) -> int:
        return self.samples.shape[1]


def room_static_gains(cfg: GenConfig, room: int) -> np.ndarray:
    """Complex static gain per subcarrier for a room (id-keyed, seed-free)."""
    n_c = cfg.num_subcarriers
    u = rng.uniforms(rng.DOM_ROOM, 0, room, 2 * n_c)
    amp = cfg.static_amp * (0.7 + 0.6 * u[:n_c])
    phase = 2.0 * np.pi * u[n_c:]
    gains = amp * np.exp(1j * phase)
    # Two room-designated subcarriers carry a static boost: the room
    # leakage channel that survives subcarrier averaging.
    hot = np.array([(2 * room) % n_c, (2 * room + 1) % n_c])
    gains[hot] *= cfg.room_boost
    return gains


def subject_fingerprint(cfg: GenConfig, subject: int) -> np.ndarray:
    """Per-subcarrier gain fingerprint of a subject (id-keyed, seed-free)."""
    u = rng.uniforms(rng.DOM_SUBJECT, 0, subject, cfg.num_subcarriers)
    return 1.0 + cfg.fingerprint_scale * (2.0 * u - 1.0)


def activity_doppler_profile(cfg: GenConfig, activity: int) -> tuple[float, np.ndarray, np.ndarray]:
    """(center frequency, per-subcarrier amplitude, per-subcarrier phase)."""
    freq = cfg.doppler_base_hz + cfg.doppler_step_hz * activity
    u = rng.uniforms(rng.DOM_ACTIVITY, 0, activity, 2 * cfg.num_subcarriers)
    amp = cfg.doppler_amp * (0.75 + 0.5 * u[: cfg.num_subcarriers])
    phase = 2.0 * np.pi * u[cfg.num_subcarriers:]
    return freq, amp, phase


def generate_window(cfg: GenConfig, activity: int, subject: int, room: int) -> CsiWindow:
    """Generate one labeled CSI window; identical inputs give identical output."""
    if not 0 <= activity < cfg.num_activities:
        raise InvalidArgument(f"activity {activity} out of range [0, {cfg.num_activities})")
    if not 0 <= subject < cfg.num_subjects:
        raise InvalidArgument(f"subject {subject} out of range [0, {cfg.num_subjects})")
    if not 0 <= room < cfg.num_rooms:
        raise InvalidArgument(f"room {room} out of range [0, {cfg.num_rooms})")

    t_len, n_c = cfg.window_len, cfg.num_subcarriers
    t = np.arange(t_len, dtype=np.float64) / cfg.sample_rate

    static = room_static_gains(cfg, room)
    finger = subject_fingerprint(cfg, subject)
    freq, dop_amp, dop_phase = activity_doppler_profile(cfg, activity)

    # Per-window stream: fixed draw order documented here.
    #   [0]           Doppler phase offset
    #   [1]           respiration rate position in band
    #   [2:4]         respiration phases (carrier, envelope)
    #   [4]           burst coin
    #   [5]           burst position
    #   [6]           burst amplitude jitter
    #   [7]           burst phase
    #   [8]           bystander phase
    #   [9:17]        interferer duty coins (up to 8 tones)
    head = rng.uniforms(rng.DOM_WINDOW, cfg.seed, 0, 17)
    noise_w = rng.normals(rng.DOM_WINDOW, cfg.seed, 1, 2 * t_len * n_c)

    h = np.tile(static, (t_len, 1)).astype(np.complex128)

    phi = 2.0 * np.pi * head[0]
    carrier = np.exp(1j * (2.0 * np.pi * freq * t + phi))
    h += carrier[:, None] * (dop_amp * np.exp(1j * dop_phase))[None, :]

    if cfg.interferer_amp > 0:
        # Coexisting narrowband transmitters, class-independent by design.
        for k, f_int in enumerate(cfg.interferer_hz):
            if head[9 + k] >= cfg.interferer_duty:
                continue
            tone = np.exp(1j * (2.0 * np.pi * f_int * t + 0.7 * k))
            h += cfg.interferer_amp * tone[:, None] * np.ones(n_c)[None, :]

    resp_rate: float | None = None
    if activity == cfg.respiration_activity:
        lo, hi = cfg.respiration_band_hz
        resp_rate = lo + (hi - lo) * head[1]
        env = 1.0 + 0.5 * np.sin(2.0 * np.pi * (resp_rate / 8.0) * t + 2.0 * np.pi * head[3])
        resp = np.exp(1j * (2.0 * np.pi * resp_rate * t + 2.0 * np.pi * head[2])) * env
        h += cfg.respiration_amp * resp[:, None] * np.ones(n_c)[None, :]

    if cfg.bystander:
        # Interfering slow motion: a weak extra Doppler component whose
        # statistics we do not claim to be physically faithful.
        byst = 0.3 * np.exp(1j * (2.0 * np.pi * 1.5 * t + 2.0 * np.pi * head[8]))
        h += byst[:, None] * np.ones(n_c)[None, :]

    # Identity fingerprint multiplies the channel terms, not receiver noise.
    h *= finger[None, :]

    if cfg.burst_prob > 0 and head[4] < cfg.burst_prob:
        pos = int(head[5] * (t_len - 3))
        amp = cfg.burst_amp * (1.0 + head[6])
        burst_phase = np.exp(1j * 2.0 * np.pi * head[7])
        h[pos:pos + 3, :] += amp * burst_phase

    if cfg.noise_std > 0:
        z = noise_w.reshape(2, t_len, n_c)
        h += cfg.noise_std * (z[0] + 1j * z[1]) / np.sqrt(2.0)

    return CsiWindow(
        samples=h,
        timestamps=t,
        activity_label=activity,
        subject_id=subject,
        room_id=room,
        resp_rate_hz=resp_rate,
    )


def drop_packets(w: CsiWindow, rate: float, seed: int) -> CsiWindow:
    """Remove rows via independent Bernoulli(rate) coins, keeping timestamps.

    rate = 0 returns the window unchanged.
    """
    if not 0.0 <= rate < 0.5:
        raise InvalidArgument("rate must be in [0, 0.5)")
    if rate == 0.0:
        return w
    keep = rng.uniforms(rng.DOM_PACKET_DROP, seed, 0, w.num_samples) >= rate
    return CsiWindow(
        samples=w.samples[keep],
        timestamps=w.timestamps[keep],
        activity_label=w.activity_label,
        subject_id=w.subject_id,
        room_id=w.room_id,
        member_flag=w.member_flag,
        resp_rate_hz=w.resp_rate_hz,
    )


def window_variant(cfg: GenConfig, index: int) -> GenConfig:
    """Config for the ``index``-th window of a dataset: same world, fresh seed."""
    return replace(cfg, seed=rng.derive_seed(cfg.seed, index))
