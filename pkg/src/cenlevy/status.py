"""Terminal statuses shared by all simulation backends."""
import enum


class PathStatus(enum.IntEnum):
    RUNNING = 0
    EXIT_JUMP = 1  # accepted jump left the stop region
    HORIZON = 2  # simulated time reached the horizon
    BOUNDARY = 3  # boundary-layer dwell detector fired
    EVENT_CAP = 4  # event budget exhausted
    REACHED_T = 5  # fixed observation time reached
    FK_OVERFLOW = 6  # Feynman-Kac exponent exceeded its cap
    EXIT_GAUSS = 7  # a Gaussian substep left the stop region
