//! Unsigned Euclidean distance to a reference surface.
//!
//! Queries are exact: a bounding-volume hierarchy prunes triangles but the
//! result is the same minimum (and the same lowest-index closest triangle)
//! that a brute-force scan returns.

use crate::error::Result;
use crate::mesh::{validate, Point, TriMesh};

/// Closest point to `p` on triangle `(a, b, c)`.
pub fn closest_point_on_triangle(p: &Point, a: &Point, b: &Point, c: &Point) -> Point {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + v * ab;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + w * ac;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + w * (c - b);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    min: Point,
    max: Point,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            min: Point::repeat(f64::INFINITY),
            max: Point::repeat(f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Point) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    fn merge(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    fn distance_squared(&self, p: &Point) -> f64 {
        let d = (self.min - p).sup(&(p - self.max)).sup(&Point::zeros());
        d.norm_squared()
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        bounds: Aabb,
        first: usize,
        count: usize,
    },
    Inner {
        bounds: Aabb,
        left: usize,
        right: usize,
    },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

const LEAF_SIZE: usize = 4;

/// Result of a nearest-point query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestHit {
    pub distance: f64,
    pub point: Point,
    pub triangle: usize,
}

/// A reference mesh `f0` plus an acceleration index over its triangles.
#[derive(Debug, Clone)]
pub struct ReferenceSurface {
    mesh: TriMesh,
    nodes: Vec<Node>,
    /// Triangle indices in leaf order.
    order: Vec<usize>,
}

impl ReferenceSurface {
    /// Indexes `mesh`; fails if it does not validate as a closed oriented sphere.
    pub fn new(mesh: TriMesh) -> Result<Self> {
        let report = validate(&mesh);
        if !report.passed {
            return Err(crate::error::Error::InvalidArgument(format!(
                "reference mesh does not validate: {:?}",
                report.issues.first()
            )));
        }
        Ok(Self::build(mesh))
    }

    /// Indexes any triangle soup, without topology checks.
    pub fn build(mesh: TriMesh) -> Self {
        let n = mesh.num_faces();
        let mut order: Vec<usize> = (0..n).collect();
        let boxes: Vec<Aabb> = (0..n)
            .map(|t| {
                let mut b = Aabb::empty();
                for p in mesh.corners(t) {
                    b.grow(&p);
                }
                b
            })
            .collect();
        let centroids: Vec<Point> = (0..n)
            .map(|t| {
                let [a, b, c] = mesh.corners(t);
                (a + b + c) / 3.0
            })
            .collect();
        let mut nodes = Vec::new();
        if n > 0 {
            build_node(&mut nodes, &mut order, 0, n, &boxes, &centroids);
        }
        Self { mesh, nodes, order }
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    fn triangle_hit(&self, t: usize, p: &Point) -> (f64, Point) {
        let [a, b, c] = self.mesh.corners(t);
        let q = closest_point_on_triangle(p, &a, &b, &c);
        ((p - q).norm_squared(), q)
    }

    /// Exact nearest point on the reference surface; ties go to the lowest
    /// triangle index.
    pub fn closest(&self, p: &Point) -> Option<ClosestHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (f64::INFINITY, Point::zeros(), usize::MAX);
        let mut stack = vec![0usize];
        while let Some(idx) = stack.pop() {
            let node = &self.nodes[idx];
            if node.bounds().distance_squared(p) > best.0 {
                continue;
            }
            match *node {
                Node::Leaf { first, count, .. } => {
                    for &t in &self.order[first..first + count] {
                        let (d2, q) = self.triangle_hit(t, p);
                        if d2 < best.0 || (d2 == best.0 && t < best.2) {
                            best = (d2, q, t);
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    let dl = self.nodes[left].bounds().distance_squared(p);
                    let dr = self.nodes[right].bounds().distance_squared(p);
                    // Visit the nearer child first.
                    if dl <= dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        Some(ClosestHit {
            distance: best.0.sqrt(),
            point: best.1,
            triangle: best.2,
        })
    }

    /// Linear scan over all triangles; the oracle for [`Self::closest`].
    pub fn closest_brute_force(&self, p: &Point) -> Option<ClosestHit> {
        let mut best: Option<(f64, Point, usize)> = None;
        for t in 0..self.mesh.num_faces() {
            let (d2, q) = self.triangle_hit(t, p);
            if best.is_none_or(|(b, _, _)| d2 < b) {
                best = Some((d2, q, t));
            }
        }
        best.map(|(d2, point, triangle)| ClosestHit {
            distance: d2.sqrt(),
            point,
            triangle,
        })
    }

    /// Distance `d ≥ 0` and its gradient `(p − q)/d` (zero on the surface).
    pub fn distance_eval(&self, p: &Point) -> (f64, Point) {
        match self.closest(p) {
            Some(hit) if hit.distance > 0.0 => (hit.distance, (p - hit.point) / hit.distance),
            Some(_) => (0.0, Point::zeros()),
            None => (f64::INFINITY, Point::zeros()),
        }
    }
}

fn build_node(
    nodes: &mut Vec<Node>,
    order: &mut [usize],
    first: usize,
    count: usize,
    boxes: &[Aabb],
    centroids: &[Point],
) -> usize {
    let slice = &mut order[first..first + count];
    let bounds = slice
        .iter()
        .fold(Aabb::empty(), |acc, &t| acc.merge(&boxes[t]));
    let idx = nodes.len();
    if count <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            bounds,
            first,
            count,
        });
        return idx;
    }
    let mut cbox = Aabb::empty();
    for &t in slice.iter() {
        cbox.grow(&centroids[t]);
    }
    let extent = cbox.max - cbox.min;
    let axis = extent.imax();
    let mid = count / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a][axis]
            .total_cmp(&centroids[b][axis])
            .then(a.cmp(&b))
    });
    nodes.push(Node::Leaf {
        bounds,
        first,
        count,
    });
    let left = build_node(nodes, order, first, mid, boxes, centroids);
    let right = build_node(nodes, order, first + mid, count - mid, boxes, centroids);
    nodes[idx] = Node::Inner {
        bounds,
        left,
        right,
    };
    idx
}

/// One-sided Hausdorff distance: max over `from`'s vertices of the distance
/// to `to`'s surface.
pub fn one_sided_hausdorff(from: &TriMesh, to: &ReferenceSurface) -> f64 {
    from.positions()
        .iter()
        .map(|p| to.distance_eval(p).0)
        .fold(0.0, f64::max)
}

/// Symmetric vertex-to-surface Hausdorff distance between two meshes.
pub fn hausdorff_distance(a: &TriMesh, b: &TriMesh) -> f64 {
    let ra = ReferenceSurface::build(a.clone());
    let rb = ReferenceSurface::build(b.clone());
    one_sided_hausdorff(a, &rb).max(one_sided_hausdorff(b, &ra))
}
