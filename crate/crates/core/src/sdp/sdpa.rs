//! Plain-text dump in SDPA sparse format.
//!
//! SDPA solves `min c'x  s.t.  Σ F_i x_i - F_0 ⪰ 0`. Our dual
//! `max b'y  s.t.  C - Σ y_i A_i ⪰ 0` maps onto it with `x = -y`, `c = b`,
//! `F_0 = -C` and `F_i = A_i`, so SDPA's optimal value is the negated dual
//! objective. Layout:
//!
//! ```text
//! m
//! nblocks
//! d_1 d_2 ...
//! b_1 b_2 ...
//! <matrix> <block> <row> <col> <value>     (1-based, row <= col, matrix 0 = F_0)
//! ```

use std::io::Write;

use super::{SdpProblem, SymBlock};
use crate::error::Result;

fn write_block<W: Write>(w: &mut W, mat: usize, blk: usize, b: &SymBlock, sign: f64) -> Result<()> {
    let n = b.dim();
    for i in 0..n {
        for j in i..n {
            let v = b.get(i, j);
            if v != 0.0 {
                writeln!(w, "{} {} {} {} {:e}", mat, blk + 1, i + 1, j + 1, sign * v)?;
            }
        }
    }
    Ok(())
}

pub fn write_sdpa<W: Write>(p: &SdpProblem, w: &mut W) -> Result<()> {
    writeln!(w, "{}", p.n_constraints())?;
    writeln!(w, "{}", p.block_dims().len())?;
    let dims: Vec<String> = p.block_dims().iter().map(|d| d.to_string()).collect();
    writeln!(w, "{}", dims.join(" "))?;
    let rhs: Vec<String> = p.constraints().iter().map(|c| format!("{:e}", c.b)).collect();
    writeln!(w, "{}", rhs.join(" "))?;
    for (k, b) in p.objective().iter().enumerate() {
        write_block(w, 0, k, b, -1.0)?;
    }
    for (i, con) in p.constraints().iter().enumerate() {
        for (k, b) in con.a.iter().enumerate() {
            write_block(w, i + 1, k, b, 1.0)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::SdpConstraint;

    #[test]
    fn dump_layout() {
        let mut a = SymBlock::zeros(2);
        a.set(0, 1, 0.5);
        let p = SdpProblem::new(
            vec![2, 1],
            vec![SymBlock::identity(2), SymBlock::identity(1)],
            vec![SdpConstraint {
                a: vec![a, SymBlock::identity(1)],
                b: 3.0,
            }],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_sdpa(&p, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "1");
        assert_eq!(lines[1], "2");
        assert_eq!(lines[2], "2 1");
        assert_eq!(lines[3], "3e0");
        assert!(lines.contains(&"0 1 1 1 -1e0"));
        assert!(lines.contains(&"0 2 1 1 -1e0"));
        assert!(lines.contains(&"1 1 1 2 5e-1"));
        assert!(lines.contains(&"1 2 1 1 1e0"));
        assert_eq!(lines.len(), 4 + 3 + 2);
    }
}
