use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use ndarray::Array2;
use num_complex::Complex64;
use serde::Serialize;

use super::gauge::{GaugeField, GaugeKind};
use super::lattice::{Dir, Flux, Geometry, MagneticLattice, Site, Window};
use super::region::RegionMask;
use crate::error::{Error, Result};

type C = Complex64;

/// Compressed sparse row storage with column indices sorted within each row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<C>,
}

impl CsrMatrix {
    /// Rows given as `(column, value)` lists; duplicate columns must already be merged.
    pub fn from_rows(rows: Vec<Vec<(usize, C)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col = Vec::new();
        let mut val = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            for (c, v) in r {
                col.push(c);
                val.push(v);
            }
            row_ptr.push(col.len());
        }
        CsrMatrix { n, row_ptr, col, val }
    }

    pub fn zeros(n: usize) -> Self {
        CsrMatrix { n, row_ptr: vec![0; n + 1], col: Vec::new(), val: Vec::new() }
    }

    pub fn nnz(&self) -> usize {
        self.col.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C)> + '_ {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.col[a..b].iter().copied().zip(self.val[a..b].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> C {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        match self.col[a..b].binary_search(&c) {
            Ok(p) => self.val[a + p],
            Err(_) => C::new(0.0, 0.0),
        }
    }

    /// `y = A·x`, accumulated left to right along each row.
    pub fn matvec(&self, x: &[C], y: &mut [C]) {
        for r in 0..self.n {
            let mut acc = C::new(0.0, 0.0);
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.val[p] * x[self.col[p]];
            }
            y[r] = acc;
        }
    }

    pub fn to_dense(&self) -> Array2<C> {
        let mut a = Array2::zeros((self.n, self.n));
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                a[(r, c)] = v;
            }
        }
        a
    }

    /// Largest `|A_rc − conj(A_cr)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    /// Max `|r − c|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n).flat_map(|r| self.row(r).map(move |(c, _)| r.abs_diff(c))).max().unwrap_or(0)
    }

    /// `A·B`. Each entry is accumulated over the inner index in ascending
    /// order, so two products sharing their nonzero terms agree bit for bit.
    pub fn matmul(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.n, other.n);
        let rows = (0..self.n)
            .map(|r| {
                let mut acc: BTreeMap<usize, C> = BTreeMap::new();
                for (z, a) in self.row(r) {
                    for (c, b) in other.row(z) {
                        *acc.entry(c).or_insert(C::new(0.0, 0.0)) += a * b;
                    }
                }
                acc.into_iter().collect()
            })
            .collect();
        CsrMatrix::from_rows(rows)
    }

    /// Principal submatrix on the ascending index list `keep`.
    pub fn submatrix(&self, keep: &[usize]) -> CsrMatrix {
        let mut pos = vec![usize::MAX; self.n];
        for (i, &k) in keep.iter().enumerate() {
            pos[k] = i;
        }
        let rows = keep
            .iter()
            .map(|&r| self.row(r).filter(|(c, _)| pos[*c] != usize::MAX).map(|(c, v)| (pos[c], v)).collect())
            .collect();
        CsrMatrix::from_rows(rows)
    }

    /// Gershgorin enclosure `[min(a_rr − R_r), max(a_rr + R_r)]` for a Hermitian matrix.
    pub fn gershgorin(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for r in 0..self.n {
            let mut d = 0.0;
            let mut rad = 0.0;
            for (c, v) in self.row(r) {
                if c == r {
                    d = v.re;
                } else {
                    rad += v.norm();
                }
            }
            lo = lo.min(d - rad);
            hi = hi.max(d + rad);
        }
        if self.n == 0 {
            (0.0, 0.0)
        } else {
            (lo, hi)
        }
    }
}

/// Where an operator came from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    pub k: u32,
    pub q: u32,
    pub flux: Flux,
    pub gauge: GaugeKind,
    pub geometry: Geometry,
    pub twist: (f64, f64),
    pub mask: Option<String>,
    pub w_norm: f64,
    pub shift: f64,
    pub note: Option<String>,
}

/// Sparse Hermitian matrix indexed by lattice sites of a window.
#[derive(Clone, Debug)]
pub struct HermitianOperator {
    matrix: CsrMatrix,
    window: Window,
    h: f64,
    rows: Vec<usize>,
    row_of: Vec<Option<usize>>,
    hop_range: usize,
    provenance: Provenance,
}

impl HermitianOperator {
    /// Wraps a matrix whose rows correspond to the window sites `rows` (ascending).
    pub fn from_parts(
        matrix: CsrMatrix,
        window: Window,
        h: f64,
        rows: Vec<usize>,
        hop_range: usize,
        provenance: Provenance,
    ) -> Self {
        assert_eq!(matrix.n, rows.len());
        let mut row_of = vec![None; window.len()];
        for (r, &v) in rows.iter().enumerate() {
            row_of[v] = Some(r);
        }
        HermitianOperator { matrix, window, h, rows, row_of, hop_range, provenance }
    }

    /// Same site indexing with a different matrix.
    pub fn with_matrix(&self, matrix: CsrMatrix, hop_range: usize) -> Self {
        assert_eq!(matrix.n, self.dim());
        HermitianOperator { matrix, hop_range, ..self.clone() }
    }

    pub fn dim(&self) -> usize {
        self.matrix.n
    }
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }
    pub fn window(&self) -> &Window {
        &self.window
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn hop_range(&self) -> usize {
        self.hop_range
    }
    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }
    /// Window index of each row.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }
    pub fn row_of_window(&self, index: usize) -> Option<usize> {
        self.row_of[index]
    }
    pub fn site(&self, row: usize) -> Site {
        self.window.plane(self.rows[row])
    }
    pub fn row_of_site(&self, site: Site) -> Option<usize> {
        self.window.locate(site).and_then(|v| self.row_of[v])
    }
    pub fn graph_distance(&self, a: usize, b: usize) -> usize {
        self.window.graph_distance(self.rows[a], self.rows[b])
    }

    pub fn apply(&self, x: &[C], y: &mut [C]) {
        self.matrix.matvec(x, y)
    }

    pub fn apply_vec(&self, x: &[C]) -> Vec<C> {
        let mut y = vec![C::new(0.0, 0.0); self.dim()];
        self.matrix.matvec(x, &mut y);
        y
    }

    pub fn to_dense(&self) -> Array2<C> {
        self.matrix.to_dense()
    }

    pub fn gershgorin(&self) -> (f64, f64) {
        self.matrix.gershgorin()
    }

    /// Upper bound on the operator norm from the Gershgorin enclosure.
    pub fn norm_bound(&self) -> f64 {
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs())
    }

    pub fn bandwidth(&self) -> usize {
        self.matrix.bandwidth()
    }

    pub fn hermitian_defect(&self) -> f64 {
        self.matrix.hermitian_defect()
    }

    /// Largest graph distance between sites joined by a nonzero off-diagonal entry.
    pub fn measured_hop_range(&self) -> usize {
        let mut worst = 0;
        for r in 0..self.dim() {
            for (c, v) in self.matrix.row(r) {
                if c != r && v != C::new(0.0, 0.0) {
                    worst = worst.max(self.graph_distance(r, c));
                }
            }
        }
        worst
    }

    /// Adds `c` to every diagonal entry.
    pub fn shifted(&self, c: f64) -> Self {
        let mut m = self.matrix.clone();
        for r in 0..m.n {
            for p in m.row_ptr[r]..m.row_ptr[r + 1] {
                if m.col[p] == r {
                    m.val[p].re += c;
                }
            }
        }
        let mut out = self.with_matrix(m, self.hop_range);
        out.provenance.shift += c;
        out
    }

    /// Sparse triplets `row,col,re,im` with a header line.
    pub fn write_triplets<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "row,col,re,im")?;
        for r in 0..self.dim() {
            for (c, v) in self.matrix.row(r) {
                writeln!(out, "{r},{c},{:e},{:e}", v.re, v.im)?;
            }
        }
        Ok(())
    }
}

/// Nearest-neighbor stencil `(Hψ)(v) = onsite(v)·ψ(v) − hop·Σ U(v→u)·ψ(u)` on
/// the gauge window, restricted to `member` sites.
///
/// Off-diagonal entries are computed once for each unordered pair and mirrored
/// with an exact conjugate, so the result is Hermitian bit for bit.
pub fn assemble_stencil(
    gauge: &GaugeField,
    member: Option<&[bool]>,
    hop: f64,
    onsite: &dyn Fn(Site) -> f64,
    h: f64,
    provenance: Provenance,
) -> Result<HermitianOperator> {
    let w = *gauge.window();
    let inside = |v: usize| member.map_or(true, |m| m[v]);
    let rows: Vec<usize> = (0..w.len()).filter(|&v| inside(v)).collect();
    if rows.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let mut row_of = vec![usize::MAX; w.len()];
    for (r, &v) in rows.iter().enumerate() {
        row_of[v] = r;
    }
    let mut entries: Vec<Vec<(usize, C)>> = vec![Vec::with_capacity(5); rows.len()];
    for (r, &v) in rows.iter().enumerate() {
        let mut diag = onsite(w.plane(v));
        let mut pairs: Vec<(usize, C)> = Vec::with_capacity(4);
        for dir in Dir::ALL {
            let Some(step) = w.step(v, dir) else { continue };
            let u = step.index;
            if !inside(u) {
                continue;
            }
            let phase = gauge.link_phase(v, dir).expect("link inside window");
            let c = row_of[u];
            if c == r {
                // self-loop on a one-site period: the pair U + conj(U) is real
                diag -= hop * phase.re;
            } else if c > r {
                let val = -hop * phase;
                match pairs.iter_mut().find(|e| e.0 == c) {
                    Some(e) => e.1 += val,
                    None => pairs.push((c, val)),
                }
            }
        }
        entries[r].push((r, C::new(diag, 0.0)));
        for (c, val) in pairs {
            entries[r].push((c, val));
            entries[c].push((r, val.conj()));
        }
    }
    let matrix = CsrMatrix::from_rows(entries);
    Ok(HermitianOperator::from_parts(matrix, w, h, rows, 1, provenance))
}

fn assemble(lattice: &MagneticLattice, gauge: &GaugeField, member: Option<&[bool]>, mask: Option<String>) -> Result<HermitianOperator> {
    let provenance = Provenance {
        k: lattice.k(),
        q: lattice.q(),
        flux: gauge.flux(),
        gauge: gauge.kind(),
        geometry: lattice.geometry(),
        twist: gauge.twist(),
        mask,
        w_norm: lattice.w_norm(),
        shift: 0.0,
        note: None,
    };
    let inv_h2 = (lattice.q() * lattice.q()) as f64;
    assemble_stencil(gauge, member, inv_h2, &|s| lattice.onsite(s), lattice.h(), provenance)
}

/// Bulk operator on the magnetic-periodic torus.
pub fn assemble_bulk(lattice: &MagneticLattice, gauge: &GaugeField) -> Result<HermitianOperator> {
    if lattice.geometry() != Geometry::Torus {
        return Err(Error::NonTorusGeometry(lattice.geometry().to_string()));
    }
    if *gauge.window() != lattice.window() {
        return Err(Error::InvalidArgument("gauge window differs from the lattice window".into()));
    }
    assemble(lattice, gauge, None, None)
}

/// Stencil on whatever window and closure the gauge field was built for
/// (strips, twisted fibers, open blocks).
pub fn assemble_window(lattice: &MagneticLattice, gauge: &GaugeField) -> Result<HermitianOperator> {
    assemble(lattice, gauge, None, None)
}

/// Dirichlet restriction of the stencil to the sites of `mask`.
pub fn assemble_restricted(lattice: &MagneticLattice, gauge: &GaugeField, mask: &RegionMask) -> Result<HermitianOperator> {
    if mask.window() != gauge.window() {
        return Err(Error::InvalidArgument("mask window differs from the gauge window".into()));
    }
    let desc = serde_json::to_string(mask.descriptor()).ok();
    assemble(lattice, gauge, Some(mask.members()), desc)
}

/// `U*·H·U` for the diagonal unitary `U = diag(phases[site])`.
pub fn gauge_transform(h: &HermitianOperator, phases: &HashMap<Site, C>) -> Result<HermitianOperator> {
    let mut p = Vec::with_capacity(h.dim());
    for r in 0..h.dim() {
        let s = h.site(r);
        p.push(*phases.get(&s).ok_or(Error::MissingPhase(s.0, s.1))?);
    }
    let m = h.matrix();
    let mut entries: Vec<Vec<(usize, C)>> = vec![Vec::new(); h.dim()];
    for r in 0..h.dim() {
        for (c, v) in m.row(r) {
            if c == r {
                entries[r].push((r, C::new(v.re * p[r].norm_sqr(), 0.0)));
            } else if c > r {
                let t = p[r].conj() * v * p[c];
                entries[r].push((c, t));
                entries[c].push((r, t.conj()));
            }
        }
    }
    let mut out = h.with_matrix(CsrMatrix::from_rows(entries), h.hop_range());
    out.provenance.note = Some("diagonal gauge transform".into());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::gauge::build_gauge;
    use crate::model::region::ShapeDescriptor;
    use ndarray_linalg::{EigValsh, UPLO};
    use std::f64::consts::PI;

    fn eigs(h: &HermitianOperator) -> Vec<f64> {
        h.to_dense().eigvalsh(UPLO::Lower).unwrap().to_vec()
    }

    #[test]
    fn bulk_is_hermitian_local_and_sized() {
        let lat = MagneticLattice::new(1, 4, 2, 3, Geometry::Torus).unwrap();
        for kind in [GaugeKind::Landau, GaugeKind::Symmetric] {
            let g = build_gauge(&lat, kind).unwrap();
            let h = assemble_bulk(&lat, &g).unwrap();
            assert_eq!(h.dim(), 16 * 6);
            assert_eq!(h.hermitian_defect(), 0.0);
            assert_eq!(h.measured_hop_range(), 1);
            assert_eq!(h.hop_range(), 1);
        }
    }

    #[test]
    fn non_torus_bulk_is_rejected() {
        let lat = MagneticLattice::new(1, 4, 2, 2, Geometry::Strip).unwrap();
        let g = build_gauge(&lat, GaugeKind::Landau).unwrap();
        assert!(matches!(assemble_bulk(&lat, &g), Err(Error::NonTorusGeometry(_))));
    }

    #[test]
    fn free_torus_matches_discrete_fourier_spectrum() {
        let (q, cx, cy) = (3u32, 2usize, 3usize);
        let lat = MagneticLattice::new(0, q, cx, cy, Geometry::Torus).unwrap();
        let g = build_gauge(&lat, GaugeKind::Symmetric).unwrap();
        let got = eigs(&assemble_bulk(&lat, &g).unwrap());
        let (nx, ny) = (q as usize * cx, q as usize * cy);
        let h2 = (q * q) as f64;
        let mut want = Vec::new();
        for a in 0..nx {
            for b in 0..ny {
                let ca = (2.0 * PI * a as f64 / nx as f64).cos();
                let cb = (2.0 * PI * b as f64 / ny as f64).cos();
                want.push(h2 * (4.0 - 2.0 * ca - 2.0 * cb));
            }
        }
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (x, y) in got.iter().zip(&want) {
            assert!((x - y).abs() < 1e-10, "{x} vs {y}");
        }
        assert!(got[0].abs() < 1e-10);
    }

    #[test]
    fn constant_potential_shifts_spectrum() {
        let lat = MagneticLattice::new(1, 4, 2, 2, Geometry::Torus).unwrap();
        let g = build_gauge(&lat, GaugeKind::Landau).unwrap();
        let base = eigs(&assemble_bulk(&lat, &g).unwrap());
        let lat2 = lat.shifted_potential(1.75).unwrap();
        let shifted = eigs(&assemble_bulk(&lat2, &g).unwrap());
        for (a, b) in base.iter().zip(&shifted) {
            assert!((b - a - 1.75).abs() < 1e-10);
        }
    }

    #[test]
    fn restriction_to_everything_is_open_window_operator() {
        let lat = MagneticLattice::new(1, 4, 2, 2, Geometry::Masked).unwrap();
        let g = build_gauge(&lat, GaugeKind::Symmetric).unwrap();
        let full = assemble_window(&lat, &g).unwrap();
        let mask = RegionMask::all(lat.window(), lat.h());
        let r = assemble_restricted(&lat, &g, &mask).unwrap();
        assert_eq!(full.matrix(), r.matrix());
    }

    #[test]
    fn single_site_restriction_is_stencil_diagonal() {
        let lat = MagneticLattice::new(1, 4, 1, 1, Geometry::Masked)
            .unwrap()
            .with_potential((0..16).map(|i| i as f64 * 0.1).collect())
            .unwrap();
        let g = build_gauge(&lat, GaugeKind::Landau).unwrap();
        let mask = RegionMask::from_descriptor(lat.window(), lat.h(), ShapeDescriptor::Sites { sites: vec![(2, 1)] }).unwrap();
        let r = assemble_restricted(&lat, &g, &mask).unwrap();
        assert_eq!(r.dim(), 1);
        let want = 4.0 * 16.0 - 4.0 * PI + 0.1 * 6.0;
        assert!((r.matrix().get(0, 0).re - want).abs() < 1e-12);
        let none = RegionMask::from_descriptor(lat.window(), lat.h(), ShapeDescriptor::Sites { sites: vec![] }).unwrap();
        assert!(matches!(assemble_restricted(&lat, &g, &none), Err(Error::EmptyRegion)));
    }

    #[test]
    fn one_site_period_fiber_is_free_symbol() {
        // q = 1 window of a single site, closed with twist (s, t)
        let lat = MagneticLattice::new(0, 1, 1, 1, Geometry::Torus).unwrap();
        let (s, t) = (0.2, 0.35);
        let g = GaugeField::build(GaugeKind::Landau, lat.flux(), lat.window(), (s, t)).unwrap();
        let h = assemble_window(&lat, &g).unwrap();
        let want = 2.0 - 2.0 * (2.0 * PI * s).cos() + 2.0 - 2.0 * (2.0 * PI * t).cos();
        assert!((h.matrix().get(0, 0).re - want).abs() < 1e-14);
    }

    #[test]
    fn gauge_transform_identity_and_missing() {
        let lat = MagneticLattice::new(1, 3, 2, 2, Geometry::Torus).unwrap();
        let g = build_gauge(&lat, GaugeKind::Symmetric).unwrap();
        let h = assemble_bulk(&lat, &g).unwrap();
        let mut ph: HashMap<Site, C> = (0..h.dim()).map(|r| (h.site(r), C::new(1.0, 0.0))).collect();
        let same = gauge_transform(&h, &ph).unwrap();
        assert_eq!(same.matrix(), h.matrix());
        ph.remove(&(1, 1));
        assert!(matches!(gauge_transform(&h, &ph), Err(Error::MissingPhase(1, 1))));
    }

    #[test]
    fn triplet_export_lists_every_entry() {
        let lat = MagneticLattice::new(1, 2, 1, 1, Geometry::Torus).unwrap();
        let g = build_gauge(&lat, GaugeKind::Landau).unwrap();
        let h = assemble_bulk(&lat, &g).unwrap();
        let mut buf = Vec::new();
        h.write_triplets(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), h.matrix().nnz() + 1);
    }
}
