//! Length-lexicographic Gödel numbering: a bijection between expressions
//! over `k` symbols and the naturals (bijective base `k`).

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::lang::{Alphabet, Expression};

/// Rank of `x` in length-lex order: `"" ↦ 0`, then all length-1
/// expressions, and so on.
pub fn godel_number(x: &Expression, k: usize) -> BigUint {
    let k = BigUint::from(k);
    let mut offset = BigUint::zero();
    let mut block = BigUint::one();
    let mut rank = BigUint::zero();
    for &s in x.symbols() {
        offset += &block;
        block *= &k;
        rank = rank * &k + BigUint::from(s);
    }
    offset + rank
}

/// Inverse of [`godel_number`].
pub fn godel_unnumber(n: &BigUint, alphabet: &Alphabet) -> Expression {
    let k = BigUint::from(alphabet.len());
    let mut rest = n.clone();
    let mut block = BigUint::one();
    let mut len = 0usize;
    while rest >= block {
        rest -= &block;
        block *= &k;
        len += 1;
    }
    let mut digits = vec![0usize; len];
    for slot in digits.iter_mut().rev() {
        let d = &rest % &k;
        *slot = d.to_usize().expect("digit below k");
        rest /= &k;
    }
    Expression::new(digits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::LengthLex;

    #[test]
    fn first_numbers() {
        let a = Alphabet::new(["#", "0", "1"]).unwrap();
        for (text, n) in [("", 0u32), ("#", 1), ("0", 2), ("1", 3), ("##", 4), ("11", 12), ("###", 13)] {
            let x = a.parse(text).unwrap();
            assert_eq!(godel_number(&x, 3), BigUint::from(n), "{text}");
            assert_eq!(godel_unnumber(&BigUint::from(n), &a), x);
        }
    }

    #[test]
    fn matches_enumeration_order() {
        let a = Alphabet::canonical(4).unwrap();
        for (i, x) in LengthLex::new(4, 5).enumerate() {
            assert_eq!(godel_number(&x, 4), BigUint::from(i));
            assert_eq!(godel_unnumber(&BigUint::from(i), &a), x);
        }
    }

    #[test]
    fn large_numbers() {
        let a = Alphabet::canonical(2).unwrap();
        let x = Expression::new(vec![1; 200]);
        let n = godel_number(&x, 2);
        // 2 + 4 + … + 2^200 = 2^201 − 2
        assert_eq!(n, (BigUint::one() << 201u32) - 2u32);
        assert_eq!(godel_unnumber(&n, &a), x);
    }
}
