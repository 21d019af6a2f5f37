import pytest

from yoccoz.dynamics import QuadraticMap, find_center


@pytest.fixture(scope="session")
def centers():
    """Superattracting centers used across the acceptance suite."""
    return {
        "airplane": find_center(3, -1.8),
        "kokopelli": find_center(4, -0.16 + 1.03j),
        "period5": find_center(5, -1.62),
        "rabbit": find_center(3, -0.1 + 0.8j),
    }
