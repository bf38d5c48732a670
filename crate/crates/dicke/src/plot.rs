//! Plot-ready data files and gnuplot script stubs.
//!
//! Every figure is a CSV (`<name>.csv`) whose columns carry their units in
//! the name, plus `<name>.gp` that plots it. Log-scale figures of signed
//! quantities plot absolute values and mark sign changes.

use crate::error::{Result, RunError};
use crate::output::{OutputDir, Table};

#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    pub name: String,
    pub table: Table,
    pub script: String,
}

/// Copies `columns` of `table` for rows where `keep` holds.
pub fn select(table: &Table, columns: &[&str], keep: impl Fn(&[String]) -> bool) -> Result<Table> {
    let idx = columns
        .iter()
        .map(|c| {
            table
                .column(c)
                .ok_or_else(|| RunError::Empty(format!("result table has no column `{c}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Table::new(columns);
    for row in table.rows.iter().filter(|r| keep(r)) {
        out.push(idx.iter().map(|&i| row[i].clone()).collect());
    }
    Ok(out)
}

fn script(name: &str, xlabel: &str, ylabel: &str, log: &str, series: &[(usize, usize, &str)]) -> String {
    let mut s = format!(
        "set datafile separator ','\nset key autotitle columnhead\nset xlabel '{xlabel}'\nset ylabel '{ylabel}'\n"
    );
    if !log.is_empty() {
        s.push_str(&format!("set logscale {log}\n"));
    }
    s.push_str(&format!("set terminal pngcairo size 900,600\nset output '{name}.png'\nplot "));
    let parts: Vec<String> = series
        .iter()
        .map(|(x, y, style)| format!("'{name}.csv' using {x}:{y} with {style}"))
        .collect();
    s.push_str(&parts.join(", \\\n     "));
    s.push('\n');
    s
}

fn eta_filter(table: &Table, eta: f64) -> Result<impl Fn(&[String]) -> bool> {
    let col = table
        .column("eta")
        .ok_or_else(|| RunError::Empty("coupling table has no eta column".into()))?;
    Ok(move |r: &[String]| r[col].parse::<f64>().is_ok_and(|v| v == eta))
}

/// Shift curves per orientation, linear and log-log with sign-change markers.
pub fn coupling_figures(table: &Table, etas: &[f64]) -> Result<Vec<Figure>> {
    let mut figs = Vec::new();
    for &eta in etas {
        let tag = format!("{eta}").replace('.', "p");
        let name = format!("shifts_eta_{tag}");
        let t = select(
            table,
            &["xi", "delta_perp_reg_over_E0", "delta_par_reg_scaled_1e4", "sum_unreg_over_E0", "sum_reg_over_E0"],
            eta_filter(table, eta)?,
        )?;
        figs.push(Figure {
            script: script(&name, "xi = k0 r", "shift / E0", "x", &[(1, 2, "lines"), (1, 3, "lines"), (1, 4, "lines dt 2")]),
            name,
            table: t,
        });

        let name = format!("shifts_loglog_eta_{tag}");
        let base = select(
            table,
            &["xi", "sum_reg_over_E0", "sum_unreg_over_E0", "sign_change_reg", "sign_change_unreg"],
            eta_filter(table, eta)?,
        )?;
        let mut t = Table::new(&[
            "xi",
            "abs_sum_reg_over_E0",
            "abs_sum_unreg_over_E0",
            "sign_change_reg",
            "sign_change_unreg",
        ]);
        for r in &base.rows {
            let abs = |s: &str| s.trim_start_matches('-').to_string();
            t.push(vec![r[0].clone(), abs(&r[1]), abs(&r[2]), r[3].clone(), r[4].clone()]);
        }
        let mut s = script(&name, "xi = k0 r", "|shift sum| / E0", "xy", &[(1, 2, "lines"), (1, 3, "lines dt 2")]);
        s.push_str(&format!(
            "replot '{name}.csv' using 1:($4 > 0 ? $2 : 1/0) with points pt 7 title 'sign change (reg)', \\\n       '{name}.csv' using 1:($5 > 0 ? $3 : 1/0) with points pt 6 title 'sign change (unreg)'\n"
        ));
        figs.push(Figure { name, table: t, script: s });
    }
    let name = "decay".to_string();
    let t = select(table, &["xi", "eta", "gamma_reg_per_gamma", "gamma_unreg_per_gamma"], |_| true)?;
    figs.push(Figure {
        script: script(&name, "xi = k0 r", "gamma_nm / gamma", "x", &[(1, 3, "lines"), (1, 4, "lines dt 2")]),
        name,
        table: t,
    });
    Ok(figs)
}

pub fn evolve_figures(table: &Table) -> Result<Vec<Figure>> {
    let mut cols: Vec<&str> = vec!["t_per_gamma"];
    cols.extend(table.header.iter().skip(1).filter(|h| h.starts_with("P_")).map(String::as_str));
    let t = select(table, &cols, |_| true)?;
    let series: Vec<(usize, usize, &str)> = (2..=cols.len()).map(|y| (1, y, "lines")).collect();
    let name = "populations".to_string();
    Ok(vec![Figure {
        script: script(&name, "t gamma", "population", "x", &series),
        name,
        table: t,
    }])
}

pub fn waiting_figure(table: &Table) -> Result<Figure> {
    let cols: Vec<&str> = table.header.iter().map(String::as_str).filter(|h| *h != "t_lo_per_gamma" && *h != "t_hi_per_gamma").collect();
    let t = select(table, &cols, |_| true)?;
    let series: Vec<(usize, usize, &str)> = (2..=cols.len()).map(|y| (1, y, "steps")).collect();
    let name = "waiting_time".to_string();
    Ok(Figure {
        script: script(&name, "t gamma", "w(t) / gamma", "", &series),
        name,
        table: t,
    })
}

pub fn angular_figure(table: &Table) -> Result<Figure> {
    let t = select(table, &["theta", "sigma_per_traj_sr", "sigma_reference", "sigma_prime"], |_| true)?;
    let name = "angular".to_string();
    Ok(Figure {
        script: script(&name, "theta", "sigma(theta) per trajectory per sr", "", &[(1, 2, "steps"), (1, 3, "steps dt 2"), (1, 4, "steps lw 2")]),
        name,
        table: t,
    })
}

pub fn timescale_figure(table: &Table) -> Result<Figure> {
    let t = select(table, &["n_atoms", "spacing_lambda0", "ratio", "t_dicke", "t_rate", "validity_flag"], |_| true)?;
    let name = "timescales".to_string();
    let mut s = script(&name, "N", "t_Dicke / t_rate", "y", &[]);
    s = s.trim_end_matches("plot \n").to_string();
    s.push_str(&format!(
        "plot for [s in system(\"tail -n +2 {name}.csv | cut -d, -f2 | sort -u\")] '{name}.csv' using 1:($2 == s ? $3 : 1/0) with linespoints title 'spacing '.s\n"
    ));
    Ok(Figure { name, table: t, script: s })
}

/// Writes every figure under `plots/`. Empty inputs are an error.
pub fn emit_plot_data(out: &mut OutputDir, figures: &[Figure]) -> Result<()> {
    if figures.is_empty() || figures.iter().any(|f| f.table.is_empty()) {
        return Err(RunError::Empty("no results to plot".into()));
    }
    for f in figures {
        out.write_table(&format!("plots/{}.csv", f.name), &f.table)?;
        out.write_bytes(&format!("plots/{}.gp", f.name), f.script.as_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn select_filters_and_reorders() {
        let mut t = Table::new(&["a", "b", "c"]);
        t.push(vec!["1".into(), "2".into(), "3".into()]);
        t.push(vec!["4".into(), "5".into(), "6".into()]);
        let s = select(&t, &["c", "a"], |r| r[0] != "4").unwrap();
        assert_eq!(s.header, vec!["c", "a"]);
        assert_eq!(s.rows, vec![vec!["3".to_string(), "1".to_string()]]);
        assert!(select(&t, &["z"], |_| true).is_err());
    }

    #[test]
    fn empty_results_write_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        assert!(emit_plot_data(&mut out, &[]).is_err());
        let empty = Figure {
            name: "x".into(),
            table: Table::new(&["a"]),
            script: String::new(),
        };
        assert!(emit_plot_data(&mut out, &[empty]).is_err());
        assert!(out.files().is_empty());
    }
}
