use super::Monfg;
use crate::error::{Result, invalid};

/// Identifiers of the compiled-in benchmark games.
pub const CATALOGUE_IDS: [u32; 5] = [1, 2, 3, 4, 5];

fn labels(n: usize) -> Vec<String> {
    ["L", "M", "R"][..n].iter().map(|s| s.to_string()).collect()
}

fn two_player(name: &str, n: usize, cells: &[[f64; 2]]) -> Monfg {
    let cells = cells.iter().map(|c| c.to_vec()).collect();
    Monfg::shared(name, vec![labels(n), labels(n)], 2, cells).expect("catalogue game is well formed")
}

/// Returns one of the five benchmark games. Payoff vectors are shared by both
/// agents; rows belong to agent 1.
pub fn game_catalogue(game_id: u32) -> Result<Monfg> {
    let game = match game_id {
        // Single pure NE at (L,M).
        1 => two_player("game1", 2, &[[4., 0.], [3., 1.], [3., 1.], [2., 2.]]),
        // Pure NE at (L,L) and (M,M).
        2 => two_player("game2", 2, &[[4., 1.], [1., 2.], [3., 1.], [3., 2.]]),
        // Pure NE at (L,L), (M,M) and the dominated (R,R).
        3 => two_player(
            "game3",
            3,
            &[
                [4., 1.],
                [1., 2.],
                [2., 1.],
                [3., 1.],
                [3., 2.],
                [1., 2.],
                [1., 2.],
                [2., 1.],
                [1., 3.],
            ],
        ),
        // No NE under SER.
        4 => two_player("game4", 2, &[[4., 0.], [2., 2.], [2., 2.], [0., 4.]]),
        // The (Im)balancing act, no NE under SER.
        5 => two_player(
            "game5",
            3,
            &[
                [4., 0.],
                [3., 1.],
                [2., 2.],
                [3., 1.],
                [2., 2.],
                [1., 3.],
                [2., 2.],
                [1., 3.],
                [0., 4.],
            ],
        ),
        other => return Err(invalid(format!("unknown game id {other}, expected 1..=5"))),
    };
    Ok(game)
}
