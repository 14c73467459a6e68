//! Short narrated walkthroughs, each backed by a bundled scenario.

use crate::bundled;

pub struct Demo {
    pub name: &'static str,
    pub scenario: &'static str,
    pub story: &'static str,
}

pub const DEMOS: &[Demo] = &[
    Demo {
        name: "pushforward-identity",
        scenario: "pushforward_identity",
        story: "\
An operation theta on bundles gives, for every map f with a section s, an
element delta(theta, f, s) over f. Pushing it forward along f itself lands
over the identity of the target, and the result is theta again: every
component agrees with theta on every probe. When f misses a point of its
target there is no section and the pushforward is the zero element; the
last check confirms it is not the unit.",
    },
    Demo {
        name: "subtheory-closure",
        scenario: "subtheory_closure",
        story: "\
The delta elements form a subtheory. The product of delta(theta, f, s1) and
delta(psi, g, s2) is delta(psi after theta, g after f, s1 after s2); pulling
back along h gives the delta element of the base-changed map and section;
pushing forward along a factor of the support gives another delta element.
Zero absorbs products with every member that sends zero to zero.",
    },
    Demo {
        name: "strict-inclusion",
        scenario: "strict_inclusion",
        story: "\
Adding a fixed bundle E = (1, 2) is a legitimate bivariant element over the
identity of X, but no operation induces it: an operation would treat the
two inclusions of a point into X alike, while adding E adds rank 1 at one
point and rank 2 at the other. The witness below shows the separating pair.
The assignments E -> add E and E -> tensor E are also injective on all
bundles of rank at most 2.",
    },
    Demo {
        name: "delta-cap",
        scenario: "delta_cap",
        story: "\
Delta(c, f, s) generalises delta by replacing the operation with an element
c over the identity of the source of f. Products, pullbacks and pushforwards
obey the same identities, with c restricted along the relevant maps.",
    },
    Demo {
        name: "grothendieck",
        scenario: "grothendieck",
        story: "\
A natural transformation T between functors, together with a matching of
operations theta -> theta^T, sends delta(theta, f, s) to delta(theta^T, f, s).
For the rank map into Z/7 this assignment respects product, pushforward and
pullback, and pairs with T on values. The exponential r -> 2^r into Z/15
turns sums into products, so doubling the rank matches squaring.",
    },
    Demo {
        name: "quillen",
        scenario: "quillen",
        story: "\
From theta = x^2 one builds P, which pulls a bundle on X back to B x X and
squares it, and S, which restricts along a constant section and squares.
Both can be computed in either order, and S is natural for the maps it is
defined on.",
    },
    Demo {
        name: "finiteness",
        scenario: "finiteness",
        story: "\
Every bundle takes finitely many ranks, so distinct polynomials can agree
on it. For ranks (1, 2) the polynomial (x - 1)(x - 2) = x^2 - 3x + 2 splits
into x^2 + 2 and 3x, which agree at 1 and at 2. A bounded search finds the
same kind of pair for the line delta_g over the group ring of C2; run the
finiteness_monoid scenario to see it.",
    },
];

pub fn find(name: &str) -> Option<&'static Demo> {
    DEMOS.iter().find(|d| d.name == name)
}

pub fn names() -> Vec<&'static str> {
    DEMOS.iter().map(|d| d.name).collect()
}

impl Demo {
    pub fn text(&self) -> &'static str {
        bundled::lookup(self.scenario).expect("demo scenarios are bundled")
    }
}
