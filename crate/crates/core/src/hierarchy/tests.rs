use super::*;
use crate::structure::parse_structure;
use crate::testkit::{self, fixture};

fn r(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

#[test]
fn order_one_is_the_marginal_on_s() {
    let ts = fixture(testkit::ORDER_TWO_SPLIT);
    let hp = unfold(&ts, Player::One, "u1", 1).unwrap();
    assert_eq!(hp.order(), 1);
    assert!(hp.defs().is_empty());
    let mu = &hp.level(1).conditionals()[0];
    assert_eq!(mu.mass_of("L"), Some(&r(1, 1)));
    assert_eq!(mu.mass_of("R"), Some(&r(0, 1)));
}

#[test]
fn identical_co_player_types_collapse_in_the_support() {
    let ts = fixture(testkit::SINGLE_DUPLICATED);
    let hp = unfold(&ts, Player::One, "u", 2).unwrap();
    assert_eq!(
        hp.support(2).len(),
        1,
        "v and v' share their order-1 point\n{hp}"
    );
    let hp3 = unfold(&ts, Player::Two, "v", 3).unwrap();
    assert_eq!(hp3.support(3).len(), 1, "{hp3}");
    assert_eq!(hp3.defs().len(), 3, "{hp3}");
}

#[test]
fn unfold_errors() {
    let ts = fixture(testkit::SINGLE);
    assert!(matches!(
        unfold(&ts, Player::One, "u", 0),
        Err(HierarchyError::NonPositiveOrder)
    ));
    assert!(matches!(
        unfold(&ts, Player::One, "v", 1),
        Err(HierarchyError::UnknownType {
            player: Player::One,
            ..
        })
    ));
}

#[test]
fn prefix_property_and_coherence() {
    for text in [
        testkit::ORDER_TWO_SPLIT,
        testkit::SINGLE_DUPLICATED,
        testkit::SINGLE,
    ] {
        let ts = fixture(text);
        for p in Player::BOTH {
            for t in ts.types(p).labels() {
                let deep = unfold(&ts, p, t, 4).unwrap();
                assert!(
                    check_coherence(&deep).is_valid(),
                    "{}",
                    check_coherence(&deep)
                );
                for n in 1..=4 {
                    assert_eq!(deep.truncate(n).unwrap(), unfold(&ts, p, t, n).unwrap());
                }
            }
        }
    }
}

const INCOHERENT: &str = "\
cps-hier hierarchy v1
player 1
order 2
S: L R
B_1: {L,R}
B_2: {L,R}
def @0 player 2 order 1
  given {L,R}: L=1
level 1
  given {L,R}: L=1
level 2
  given {L,R}: (R,@0)=1
";

#[test]
fn hand_built_incoherent_point() {
    let hp = parse_hierarchy(INCOHERENT).unwrap();
    assert_eq!(serialize_hierarchy(&hp), INCOHERENT);
    let report = check_coherence(&hp);
    assert_eq!(report.violations.len(), 2);
    let v = &report.violations[0];
    assert_eq!(v.level, 2);
    assert_eq!(v.condition.to_string(), "{L,R}");
    assert_eq!(
        (v.atom.as_str(), &v.marginal, &v.lower),
        ("L", &r(0, 1), &r(1, 1))
    );
    assert!(check_coherence(&hp.truncate(1).unwrap()).is_valid());
}

#[test]
fn hierarchy_text_round_trips() {
    let ts = fixture(testkit::SINGLE_DUPLICATED);
    let hp = unfold(&ts, Player::One, "u'", 3).unwrap();
    let text = serialize_hierarchy(&hp);
    assert_eq!(parse_hierarchy(&text).unwrap(), hp);
    assert_eq!(serialize_hierarchy(&parse_hierarchy(&text).unwrap()), text);
}

#[test]
fn parse_rejects_bad_references() {
    let bad = INCOHERENT.replace("(R,@0)", "(R,@1)");
    assert!(parse_hierarchy(&bad).is_err());
    let bad = INCOHERENT.replace("def @0 player 2", "def @0 player 1");
    assert!(parse_hierarchy(&bad).is_err());
    let bad = INCOHERENT.replace("(R,@0)=1", "(R,@0)=1/2");
    assert!(parse_hierarchy(&bad).is_err());
}

#[test]
fn table_interns_equal_points_once() {
    let ts = fixture(testkit::SINGLE_DUPLICATED);
    let table = HierarchyTable::for_structure(&ts);
    let mut u = Unfolder::new(&table, &ts).unwrap();
    for n in 1..=3 {
        for p in Player::BOTH {
            let ids: Vec<_> = (0..2).map(|t| u.point(p, t, n)).collect();
            assert_eq!(ids[0], ids[1], "duplicates at order {n}");
        }
    }
    assert_eq!(table.len(), 6);
    let id = u.point(Player::One, 0, 3);
    assert_eq!(table.import(&table.export(id)).unwrap(), id);
}

#[test]
fn refine_examples() {
    let ts = fixture(testkit::ORDER_TWO_SPLIT);
    assert_eq!(refine(&ts, 0), Partition::trivial(&ts));
    let p1 = refine(&ts, 1);
    assert_eq!(p1.labeled_cells(&ts, Player::One), vec![vec!["u1", "u2"]]);
    assert_eq!(
        p1.labeled_cells(&ts, Player::Two),
        vec![vec!["v1"], vec!["v2"]]
    );
    let p2 = refine(&ts, 2);
    assert_eq!(
        p2.labeled_cells(&ts, Player::One),
        vec![vec!["u1"], vec!["u2"]]
    );
    assert!(p2.refines(&p1) && !p1.refines(&p2));
    let (fix, depth) = refine_to_fixpoint(&ts);
    assert_eq!((depth, &fix), (2, &p2));
    assert_eq!(refine(&ts, depth + 5), fix);

    let dup = fixture(testkit::SINGLE_DUPLICATED);
    for n in 0..5 {
        assert_eq!(refine(&dup, n).total_cells(), 2);
    }
    assert_eq!(refine_to_fixpoint(&fixture(testkit::SINGLE)).1, 0);
}

#[test]
fn terminality_examples() {
    let single = fixture(testkit::SINGLE);
    let dup = fixture(testkit::SINGLE_DUPLICATED);
    assert!(terminal_over(&single, &single).unwrap().all_matched());
    let report = terminal_over(&single, &dup).unwrap();
    assert!(report.all_matched());
    assert_eq!(
        report.row(Player::One, "u'").unwrap().outcome,
        Match::Matched(vec!["u".into()])
    );
    assert!(finitely_terminal_at(&single, &dup, 3)
        .unwrap()
        .all_matched());

    let target = parse_structure(
        "cps-hier v1\nS: L R\nplayer 1\nB: {L,R}\nT: u\nbelief u\n  given {L,R}: (L,v)=1\n\
         player 2\nB: {L,R}\nT: v\nbelief v\n  given {L,R}: (L,u)=1\n",
    )
    .unwrap();
    let probe = parse_structure(
        "cps-hier v1\nS: L R\nplayer 1\nB: {L,R}\nT: u\nbelief u\n  given {L,R}: (L,v)=1\n\
         player 2\nB: {L,R}\nT: v\nbelief v\n  given {L,R}: (R,u)=1\n",
    )
    .unwrap();
    let report = terminal_over(&target, &probe).unwrap();
    assert!(report.fixpoint);
    assert_eq!(
        report.row(Player::One, "u").unwrap().outcome,
        Match::Unmatched { order: 2 }
    );
    assert_eq!(
        report.row(Player::Two, "v").unwrap().outcome,
        Match::Unmatched { order: 1 }
    );
    let at1 = finitely_terminal_at(&target, &probe, 1).unwrap();
    assert_eq!(
        at1.row(Player::One, "u").unwrap().outcome,
        Match::Matched(vec!["u".into()])
    );

    assert!(matches!(
        terminal_over(&single, &fixture(testkit::DEGENERATE)),
        Err(StructureError::BaseMismatch(_))
    ));
}
