//! Dense factors over sorted variable lists, row-major with the first
//! variable most significant.

use crate::bayesnet::BayesNet;
use crate::tabular::ValueId;

#[derive(Clone, Debug)]
pub(crate) struct Factor {
    pub vars: Vec<usize>,
    pub cards: Vec<usize>,
    pub values: Vec<f64>,
}

fn strides(cards: &[usize]) -> Vec<usize> {
    let mut s = vec![1; cards.len()];
    for i in (0..cards.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * cards[i + 1];
    }
    s
}

/// Increments a mixed-radix counter, last digit fastest. Returns false on
/// wrap-around.
fn advance(digits: &mut [usize], cards: &[usize]) -> bool {
    for i in (0..digits.len()).rev() {
        digits[i] += 1;
        if digits[i] < cards[i] {
            return true;
        }
        digits[i] = 0;
    }
    false
}

impl Factor {
    pub fn unit() -> Self {
        Factor {
            vars: Vec::new(),
            cards: Vec::new(),
            values: vec![1.0],
        }
    }

    /// P(v | parents(v)) as a factor over `{v} ∪ parents(v)`.
    pub fn from_cpt(net: &BayesNet, v: usize) -> Self {
        let schema = net.schema();
        let parents = net.parents(v);
        let mut vars: Vec<usize> = parents.to_vec();
        vars.push(v);
        vars.sort_unstable();
        let cards: Vec<usize> = vars.iter().map(|&x| schema.cardinality(x)).collect();
        let size: usize = cards.iter().product();
        let mut values = Vec::with_capacity(size);
        let own = vars.iter().position(|&x| x == v).expect("own variable present");
        let parent_pos: Vec<usize> = parents
            .iter()
            .map(|p| vars.iter().position(|x| x == p).expect("parent present"))
            .collect();
        let cpt = net.cpt(v);
        let mut digits = vec![0usize; vars.len()];
        loop {
            let row = cpt.row_index(parent_pos.iter().map(|&i| digits[i] as ValueId));
            values.push(cpt.prob(row, digits[own] as ValueId));
            if !advance(&mut digits, &cards) {
                break;
            }
        }
        Factor { vars, cards, values }
    }

    pub fn contains(&self, v: usize) -> bool {
        self.vars.binary_search(&v).is_ok()
    }

    /// Fixes `v = value` and drops `v`.
    pub fn reduce(&self, v: usize, value: ValueId) -> Factor {
        let Ok(pos) = self.vars.binary_search(&v) else {
            return self.clone();
        };
        let st = strides(&self.cards);
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(pos);
        cards.remove(pos);
        let size: usize = cards.iter().product();
        let mut values = Vec::with_capacity(size);
        let mut digits = vec![0usize; vars.len()];
        let offset = value as usize * st[pos];
        loop {
            let mut idx = offset;
            for (i, d) in digits.iter().enumerate() {
                let src = if i < pos { i } else { i + 1 };
                idx += d * st[src];
            }
            values.push(self.values[idx]);
            if !advance(&mut digits, &cards) {
                break;
            }
        }
        Factor { vars, cards, values }
    }

    pub fn product(&self, other: &Factor) -> Factor {
        let mut vars: Vec<usize> = self.vars.iter().chain(&other.vars).copied().collect();
        vars.sort_unstable();
        vars.dedup();
        let cards: Vec<usize> = vars
            .iter()
            .map(|v| {
                self.vars
                    .iter()
                    .position(|x| x == v)
                    .map(|i| self.cards[i])
                    .unwrap_or_else(|| other.cards[other.vars.iter().position(|x| x == v).unwrap()])
            })
            .collect();
        let map_strides = |f: &Factor| -> Vec<usize> {
            let st = strides(&f.cards);
            vars.iter()
                .map(|v| f.vars.iter().position(|x| x == v).map_or(0, |i| st[i]))
                .collect()
        };
        let sa = map_strides(self);
        let sb = map_strides(other);
        let size: usize = cards.iter().product();
        let mut values = Vec::with_capacity(size);
        let mut digits = vec![0usize; vars.len()];
        let (mut ia, mut ib) = (0usize, 0usize);
        loop {
            values.push(self.values[ia] * other.values[ib]);
            // manual advance keeping the two flat indices in step
            let mut i = digits.len();
            loop {
                if i == 0 {
                    return Factor { vars, cards, values };
                }
                i -= 1;
                digits[i] += 1;
                ia += sa[i];
                ib += sb[i];
                if digits[i] < cards[i] {
                    break;
                }
                ia -= sa[i] * cards[i];
                ib -= sb[i] * cards[i];
                digits[i] = 0;
            }
        }
    }

    pub fn sum_out(&self, v: usize) -> Factor {
        let Ok(pos) = self.vars.binary_search(&v) else {
            return self.clone();
        };
        let st = strides(&self.cards);
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(pos);
        cards.remove(pos);
        let size: usize = cards.iter().product();
        let mut values = vec![0.0; size];
        let outer = st[pos] * self.cards[pos];
        let inner = st[pos];
        for (idx, &x) in self.values.iter().enumerate() {
            let hi = idx / outer;
            let lo = idx % inner;
            values[hi * inner + lo] += x;
        }
        Factor { vars, cards, values }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(vars: &[usize], cards: &[usize], values: &[f64]) -> Factor {
        Factor {
            vars: vars.to_vec(),
            cards: cards.to_vec(),
            values: values.to_vec(),
        }
    }

    #[test]
    fn product_and_marginal() {
        // a over var 0 (2), b over vars 0,1 (2x3)
        let a = f(&[0], &[2], &[0.2, 0.8]);
        let b = f(&[0, 1], &[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let p = a.product(&b);
        assert_eq!(p.vars, [0, 1]);
        assert_eq!(p.values, [0.2, 0.4, 0.6000000000000001, 3.2, 4.0, 4.800000000000001]);
        let m = p.sum_out(0);
        assert_eq!(m.vars, [1]);
        assert!((m.values[0] - 3.4).abs() < 1e-12);
        let r = b.reduce(1, 2);
        assert_eq!(r.values, [3.0, 6.0]);
        let r0 = b.reduce(0, 1);
        assert_eq!(r0.values, [4.0, 5.0, 6.0]);
    }

    #[test]
    fn product_of_disjoint_is_outer() {
        let a = f(&[2], &[2], &[1.0, 2.0]);
        let b = f(&[0], &[2], &[10.0, 100.0]);
        let p = a.product(&b);
        assert_eq!(p.vars, [0, 2]);
        assert_eq!(p.values, [10.0, 20.0, 100.0, 200.0]);
        assert_eq!(p.sum_out(2).values, [30.0, 300.0]);
        assert_eq!(Factor::unit().product(&a).values, a.values);
    }
}
