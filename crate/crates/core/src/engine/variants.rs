//! Top-down trimming, bottom-up extension, and the two-pointer sweeps.

use std::collections::{BTreeSet, HashMap};

use super::{CoreKind, CoreSet, EngineError, Provenance, SafetyContext, SubpathRef, Variant};
use crate::fd_safety::maximal_fd_safe_windows;
use crate::graph::{contains_subpath, NodeId};

/// The whole base paths.
pub fn trimming_core(ctx: &SafetyContext) -> CoreSet {
    CoreSet {
        kind: CoreKind::Trimming,
        members: (0..ctx.base().len()).map(|i| ctx.full_path(i)).collect(),
    }
}

/// Known-safe seeds. With the prefilter these are the maximal FD-safe
/// windows of each base path together with the overlap of each pair of
/// consecutive windows (or the edge leaving their shared node), so every
/// maximal safe subpath contains one. Without it, every single edge.
pub fn extending_core(ctx: &mut SafetyContext) -> CoreSet {
    let mut members = BTreeSet::new();
    for i in 0..ctx.base().len() {
        let path = ctx.base()[i].clone();
        if ctx.options().prefilter {
            let windows = maximal_fd_safe_windows(ctx.graph(), &path).expect("base paths are paths");
            for (j, &(a, b)) in windows.iter().enumerate() {
                members.insert(SubpathRef::new(i, a, b));
                if let Some(&(a2, _)) = windows.get(j + 1) {
                    if a2 < b {
                        members.insert(SubpathRef::new(i, a2, b));
                    } else {
                        members.insert(SubpathRef::new(i, b, b + 1));
                    }
                }
            }
        } else {
            for l in 0..path.len() - 1 {
                members.insert(SubpathRef::new(i, l, l + 1));
            }
        }
    }
    for p in &members {
        let nodes = ctx.nodes(*p).to_vec();
        ctx.mark(&nodes, Provenance::ExcessFlow);
    }
    CoreSet {
        kind: CoreKind::Extending,
        members,
    }
}

pub fn top_down(ctx: &mut SafetyContext, core: &CoreSet) -> Result<Vec<SubpathRef>, EngineError> {
    let mut reported = Vec::new();
    let mut reported_nodes: Vec<Vec<NodeId>> = Vec::new();
    let mut core = core.members.clone();
    while !core.is_empty() {
        let tested: Vec<SubpathRef> = core.iter().copied().collect();
        let safe: BTreeSet<SubpathRef> = ctx.get_safe(&tested)?.into_iter().collect();
        for &p in &safe {
            reported.push(p);
            reported_nodes.push(ctx.nodes(p).to_vec());
        }
        let unsafe_: BTreeSet<SubpathRef> = core.difference(&safe).copied().collect();
        let mut next = BTreeSet::new();
        for p in &unsafe_ {
            if p.edges() < 2 {
                continue;
            }
            let last = ctx.base()[p.path].len() - 1;
            if p.right == last || unsafe_.contains(&SubpathRef::new(p.path, p.left + 1, p.right + 1)) {
                next.insert(SubpathRef::new(p.path, p.left + 1, p.right));
            }
            if p.left == 0 || unsafe_.contains(&SubpathRef::new(p.path, p.left - 1, p.right - 1)) {
                next.insert(SubpathRef::new(p.path, p.left, p.right - 1));
            }
        }
        next.retain(|q| !reported_nodes.iter().any(|r| contains_subpath(r, ctx.nodes(*q))));
        core = next;
    }
    Ok(reported)
}

pub fn bottom_up(ctx: &mut SafetyContext, core: &CoreSet) -> Result<Vec<SubpathRef>, EngineError> {
    let mut reported = Vec::new();
    let mut core = core.members.clone();
    while !core.is_empty() {
        let mut tested = BTreeSet::new();
        for p in &core {
            if p.left > 0 {
                tested.insert(SubpathRef::new(p.path, p.left - 1, p.right));
            }
            if p.right + 1 < ctx.base()[p.path].len() {
                tested.insert(SubpathRef::new(p.path, p.left, p.right + 1));
            }
        }
        let tested: Vec<SubpathRef> = tested.into_iter().collect();
        let safe: BTreeSet<SubpathRef> = ctx.get_safe(&tested)?.into_iter().collect();
        for p in &core {
            let left = p.left > 0 && safe.contains(&SubpathRef::new(p.path, p.left - 1, p.right));
            let right = safe.contains(&SubpathRef::new(p.path, p.left, p.right + 1));
            if !left && !right {
                reported.push(*p);
            }
        }
        core = safe;
    }
    Ok(reported)
}

/// Largest `x` in `[lo, hi)` with `probe(x)`, given that `probe` holds up
/// to some point and fails after it, and that `hi` fails or is out of
/// range. Bisects while more than `threshold` positions are open.
pub fn last_true<E>(
    mut lo: usize,
    mut hi: usize,
    threshold: usize,
    mut probe: impl FnMut(usize) -> Result<bool, E>,
) -> Result<usize, E> {
    while hi - lo - 1 > threshold {
        let mid = lo + (hi - lo) / 2;
        if probe(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = lo + 1;
    while x < hi && probe(x)? {
        x += 1;
    }
    Ok(x - 1)
}

/// Smallest `x` in `(lo, hi]` with `probe(x)`, given that `probe` fails
/// up to some point and holds after it, that `lo` fails and `hi` holds.
/// A pure linear scan still probes `hi` when it gets there.
pub fn first_true<E>(
    mut lo: usize,
    mut hi: usize,
    threshold: usize,
    mut probe: impl FnMut(usize) -> Result<bool, E>,
) -> Result<usize, E> {
    let linear = hi - lo - 1 <= threshold;
    while hi - lo - 1 > threshold {
        let mid = lo + (hi - lo) / 2;
        if probe(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut x = lo + 1;
    while x < hi && !probe(x)? {
        x += 1;
    }
    if x == hi && linear {
        probe(hi)?;
    }
    Ok(x)
}

struct PathProbe<'c, 'a> {
    ctx: &'c mut SafetyContext<'a>,
    path: usize,
    known: HashMap<(usize, usize), bool>,
}

impl PathProbe<'_, '_> {
    fn safe(&mut self, l: usize, r: usize) -> Result<bool, EngineError> {
        if let Some(&v) = self.known.get(&(l, r)) {
            return Ok(v);
        }
        let v = self.ctx.is_safe(SubpathRef::new(self.path, l, r))?;
        self.known.insert((l, r), v);
        Ok(v)
    }
}

pub fn two_pointer(ctx: &mut SafetyContext) -> Result<Vec<SubpathRef>, EngineError> {
    let mut reported = Vec::new();
    for i in 0..ctx.base().len() {
        let t = ctx.base()[i].len();
        let mut probe = PathProbe {
            ctx: &mut *ctx,
            path: i,
            known: HashMap::new(),
        };
        let (mut l, mut r) = (0, 1);
        loop {
            while r < t && probe.safe(l, r)? {
                r += 1;
            }
            reported.push(SubpathRef::new(i, l, r - 1));
            if r >= t {
                break;
            }
            while !probe.safe(l, r)? {
                l += 1;
            }
        }
    }
    Ok(reported)
}

pub fn two_pointer_bin(ctx: &mut SafetyContext, threshold: usize) -> Result<Vec<SubpathRef>, EngineError> {
    let mut reported = Vec::new();
    for i in 0..ctx.base().len() {
        let t = ctx.base()[i].len();
        let mut probe = PathProbe {
            ctx: &mut *ctx,
            path: i,
            known: HashMap::new(),
        };
        let mut l = 0;
        let mut safe_to = l;
        loop {
            let r = last_true(safe_to, t, threshold, |x| probe.safe(l, x))?;
            reported.push(SubpathRef::new(i, l, r));
            if r + 1 >= t {
                break;
            }
            let r = r + 1;
            l = first_true(l, r - 1, threshold, |x| probe.safe(x, r))?;
            safe_to = r;
        }
    }
    Ok(reported)
}

/// Runs `variant` and returns the node sequences it reports, unmerged.
pub fn run_variant(ctx: &mut SafetyContext, variant: Variant) -> Result<Vec<Vec<NodeId>>, EngineError> {
    let refs = match variant {
        Variant::TopDown => {
            let core = trimming_core(ctx);
            top_down(ctx, &core)?
        }
        Variant::BottomUp => {
            let core = extending_core(ctx);
            bottom_up(ctx, &core)?
        }
        Variant::TwoPointer => two_pointer(ctx)?,
        Variant::TwoPointerBin => {
            let threshold = ctx.options().bin_threshold;
            two_pointer_bin(ctx, threshold)?
        }
    };
    Ok(refs.into_iter().map(|p| ctx.nodes(p).to_vec()).collect())
}
