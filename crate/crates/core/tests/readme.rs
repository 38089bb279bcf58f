use chainverifier_core::*;

fn verify() -> Result<Conclusion> {
    let params = XnesParams::equal_weights(3, 4, 2, 1.0, 1.0, Objective::sphere())?;
    let chain = XnesChain::new(params)?;
    let x_star = StateVector::from_slice(&[0.0, 0.0, 0.0])?;
    let witness = find_rank_witness(&chain, &x_star, DEFAULT_RANK_REL_TOL, 42)?
        .expect("sampled witnesses are admissible for this chain");
    let origins: Vec<StateVector> = halton_box(&[-5.0; 3], &[5.0; 3], 32)
        .into_iter()
        .map(StateVector::new)
        .collect::<Result<_>>()?;
    let budget = SearchBudget::default();
    let globally =
        certify_globally_attracting(&chain, &x_star, &origins, 0.1, 2, &budget, 1)?;
    let steadily =
        certify_steadily_attracting(&chain, &x_star, &origins, 0.1, 1, 8, &budget, 2)?;
    let returns = return_lengths(&chain, &x_star, 0.01, 6, &budget, 3)?;
    let verdict = assemble_verdict(witness, Some(globally), Some(steadily), Some(returns))?;
    Ok(verdict.conclusion)
}

#[test]
fn readme_snippet_runs() {
    assert_eq!(verify().unwrap(), Conclusion::AperiodicPhiIrreducibleTChain);
}
