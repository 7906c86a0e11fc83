//! Torus grid networks parametrized by (λ, δ, p).
//!
//! A `rows × cols` grid of signalized intersections is wrapped into a
//! torus, so every street is a ring road and every intersection has
//! exactly 4 incoming and 4 outgoing approaches. Block lengths are
//! sampled with mean `ℓ` and coefficient of variation `δ`; opposite
//! directions of a street segment share one sampled length.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// Direction of travel on a directed block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Heading {
    North,
    South,
    East,
    West,
}

pub const HEADINGS: [Heading; 4] = [Heading::North, Heading::South, Heading::East, Heading::West];

/// Signal axis an approach belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    NorthSouth,
    EastWest,
}

impl Heading {
    pub fn index(self) -> usize {
        match self {
            Heading::North => 0,
            Heading::South => 1,
            Heading::East => 2,
            Heading::West => 3,
        }
    }

    pub fn axis(self) -> Axis {
        match self {
            Heading::North | Heading::South => Axis::NorthSouth,
            Heading::East | Heading::West => Axis::EastWest,
        }
    }

    pub fn opposite(self) -> Heading {
        match self {
            Heading::North => Heading::South,
            Heading::South => Heading::North,
            Heading::East => Heading::West,
            Heading::West => Heading::East,
        }
    }

    /// Compass heading after a left turn.
    pub fn left(self) -> Heading {
        match self {
            Heading::North => Heading::West,
            Heading::West => Heading::South,
            Heading::South => Heading::East,
            Heading::East => Heading::North,
        }
    }

    /// Compass heading after a right turn.
    pub fn right(self) -> Heading {
        self.left().opposite()
    }
}

/// Parameters defining one torus grid network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub rows: usize,
    pub cols: usize,
    /// Mean block length ℓ in cells.
    pub mean_block_length: usize,
    /// Ratio of mean block length to mean green time.
    pub lambda: f64,
    /// Coefficient of variation of block lengths.
    pub delta: f64,
    /// Probability that a driver at the stop line turns.
    pub turn_prob: f64,
    pub seed: u64,
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::invalid("rows/cols", "grid must be at least 1×1"));
        }
        // shorter blocks distort the CA dynamics
        if self.mean_block_length < 6 {
            return Err(Error::invalid(
                "ell",
                format!(
                    "mean block length must be ≥ 6, got {}",
                    self.mean_block_length
                ),
            ));
        }
        let lambda_ok = self.lambda.is_finite() && self.lambda > 0.0;
        if !lambda_ok {
            return Err(Error::invalid("lambda", "must be positive and finite"));
        }
        if !(0.0..=1.0).contains(&self.turn_prob) {
            return Err(Error::invalid("p", "turn probability must lie in [0, 1]"));
        }
        if self.delta < 0.0 {
            return Err(Error::invalid("delta", "COV must be nonnegative"));
        }
        if (self.mean_block_length as f64) * (1.0 - self.delta) < 2.0 {
            return Err(Error::invalid(
                "delta",
                format!(
                    "ell(1-delta) = {:.2} < 2: shortest block would drop below 2 cells",
                    self.mean_block_length as f64 * (1.0 - self.delta)
                ),
            ));
        }
        Ok(())
    }

    pub fn intersections(&self) -> usize {
        self.rows * self.cols
    }
}

/// One directed road segment between two consecutive intersections.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    /// Intersection the block leaves.
    pub from: usize,
    /// Intersection whose stop line ends the block.
    pub to: usize,
    pub heading: Heading,
    pub len: usize,
}

/// Wiring of one intersection: block ids by heading of travel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Intersection {
    /// `incoming[h]` ends here and its vehicles travel with heading `h`.
    pub incoming: [usize; 4],
    /// `outgoing[h]` leaves here with heading `h`.
    pub outgoing: [usize; 4],
}

/// Immutable torus grid network.
#[derive(Debug, Clone)]
pub struct Network {
    cfg: NetworkConfig,
    blocks: Vec<Block>,
    intersections: Vec<Intersection>,
    total_cells: usize,
}

/// Draw `n` block lengths from the symmetric two-point law
/// `{round(ℓ(1−δ)), round(ℓ(1+δ))}` with equal probability, which has
/// mean ℓ and coefficient of variation δ before rounding.
pub fn sample_block_lengths(n: usize, ell: usize, delta: f64, seed: u64) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::invalid("n", "need at least one block"));
    }
    let lo = (ell as f64) * (1.0 - delta);
    if lo < 2.0 {
        return Err(Error::invalid(
            "delta",
            format!("ell(1-delta) = {lo:.2} < 2"),
        ));
    }
    let lo = lo.round() as usize;
    let hi = ((ell as f64) * (1.0 + delta)).round() as usize;
    let mut rng = stream_rng(seed, Stream::BlockLengths);
    Ok((0..n)
        .map(|_| if rng.random::<f64>() < 0.5 { lo } else { hi })
        .collect())
}

impl Network {
    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn intersections(&self) -> &[Intersection] {
        &self.intersections
    }

    pub fn n_intersections(&self) -> usize {
        self.intersections.len()
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn total_cells(&self) -> usize {
        self.total_cells
    }

    /// Block leaving intersection `node` with heading `h`.
    pub fn outgoing(&self, node: usize, h: Heading) -> usize {
        self.intersections[node].outgoing[h.index()]
    }

    /// Block arriving at intersection `node` whose traffic travels with
    /// heading `h`.
    pub fn incoming(&self, node: usize, h: Heading) -> usize {
        self.intersections[node].incoming[h.index()]
    }

    /// Stable text description (adjacency plus lengths) for golden tests.
    pub fn describe(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        writeln!(
            s,
            "torus {}x{} ell={} lambda={} delta={} p={} seed={}",
            self.cfg.rows,
            self.cfg.cols,
            self.cfg.mean_block_length,
            self.cfg.lambda,
            self.cfg.delta,
            self.cfg.turn_prob,
            self.cfg.seed
        )
        .unwrap();
        for (i, b) in self.blocks.iter().enumerate() {
            writeln!(
                s,
                "block {i} {:?} from {} to {} len {}",
                b.heading, b.from, b.to, b.len
            )
            .unwrap();
        }
        s
    }
}

/// Build the torus network for `cfg`. Deterministic in `cfg.seed`.
pub fn build_network(cfg: &NetworkConfig) -> Result<Network> {
    cfg.validate()?;
    let (rows, cols) = (cfg.rows, cfg.cols);
    let n_nodes = rows * cols;
    let node = |r: usize, c: usize| r * cols + c;

    // One length per undirected street segment, shared by both directions:
    // horizontal segments (node -> east neighbor) then vertical ones
    // (node -> north neighbor), each indexed by the node they leave.
    let lengths = sample_block_lengths(2 * n_nodes, cfg.mean_block_length, cfg.delta, cfg.seed)?;
    let horizontal = &lengths[..n_nodes];
    let vertical = &lengths[n_nodes..];

    // blocks indexed as from_node * 4 + heading
    let mut blocks = Vec::with_capacity(4 * n_nodes);
    for r in 0..rows {
        for c in 0..cols {
            let from = node(r, c);
            for h in HEADINGS {
                let (to, len) = match h {
                    // north neighbor is one row up with wraparound
                    Heading::North => (node((r + 1) % rows, c), vertical[from]),
                    Heading::South => {
                        let to = node((r + rows - 1) % rows, c);
                        (to, vertical[to])
                    }
                    Heading::East => (node(r, (c + 1) % cols), horizontal[from]),
                    Heading::West => {
                        let to = node(r, (c + cols - 1) % cols);
                        (to, horizontal[to])
                    }
                };
                blocks.push(Block {
                    from,
                    to,
                    heading: h,
                    len,
                });
            }
        }
    }

    let mut intersections = Vec::with_capacity(n_nodes);
    for r in 0..rows {
        for c in 0..cols {
            let id = node(r, c);
            let mut outgoing = [0usize; 4];
            let mut incoming = [0usize; 4];
            for h in HEADINGS {
                outgoing[h.index()] = id * 4 + h.index();
                // the block that arrives here heading h leaves the
                // neighbor on the opposite side
                let neighbor = match h {
                    Heading::North => node((r + rows - 1) % rows, c),
                    Heading::South => node((r + 1) % rows, c),
                    Heading::East => node(r, (c + cols - 1) % cols),
                    Heading::West => node(r, (c + 1) % cols),
                };
                incoming[h.index()] = neighbor * 4 + h.index();
            }
            intersections.push(Intersection { incoming, outgoing });
        }
    }

    let total_cells = blocks.iter().map(|b| b.len).sum();
    let net = Network {
        cfg: cfg.clone(),
        blocks,
        intersections,
        total_cells,
    };
    debug_assert!(net.check_wiring());
    Ok(net)
}

impl Network {
    fn check_wiring(&self) -> bool {
        self.intersections.iter().enumerate().all(|(id, x)| {
            HEADINGS.iter().all(|&h| {
                let out = &self.blocks[x.outgoing[h.index()]];
                let inc = &self.blocks[x.incoming[h.index()]];
                out.from == id && out.heading == h && inc.to == id && inc.heading == h
            })
        })
    }
}
