use num_traits::Float;

/// A point in the simulation plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Float> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Point2 { x, y }
    }

    pub fn distance_sq(&self, other: &Self) -> T {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn distance(&self, other: &Self) -> T {
        self.distance_sq(other).sqrt()
    }

    /// Moves at most `step` toward `target`. Returns the new point and whether
    /// the target was reached.
    pub fn step_toward(&self, target: &Self, step: T) -> (Self, bool) {
        let d = self.distance(target);
        if d <= step {
            (*target, true)
        } else {
            let f = step / d;
            (
                Point2::new(self.x + (target.x - self.x) * f, self.y + (target.y - self.y) * f),
                false,
            )
        }
    }

    pub fn clamp_to(&self, width: T, height: T) -> Self {
        Point2::new(
            self.x.max(T::zero()).min(width),
            self.y.max(T::zero()).min(height),
        )
    }
}

/// True when `a` and `b` are within `range` of each other (inclusive).
pub fn within_range<T: Float>(a: &Point2<T>, b: &Point2<T>, range: T) -> bool {
    a.distance_sq(b) <= range * range
}
