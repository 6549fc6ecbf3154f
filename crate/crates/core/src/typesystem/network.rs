use std::fmt;

use serde::Serialize;

use crate::lattice::SecEnv;
use crate::model::Model;
use crate::syntax::{Component, Path};

use super::{base_counter, conformance, reconcile_owners, Counter, Loc, TypeCtx, TypeError, Typing};

#[derive(Debug, Clone)]
pub struct ComponentTyping {
    pub component: Component,
    pub counter: Counter,
    pub typing: Typing,
}

#[derive(Debug, Clone)]
pub struct NetworkTyping {
    pub components: Vec<ComponentTyping>,
    /// Join of every component's final environment.
    pub env_after: SecEnv,
}

impl NetworkTyping {
    pub fn max_loop_iterations(&self) -> usize {
        self.components
            .iter()
            .flat_map(|c| c.typing.derivation.loop_iterations())
            .max()
            .unwrap_or(0)
    }
}

/// Every component error found, in component order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NetworkTypeError {
    pub errors: Vec<TypeError>,
}

impl NetworkTypeError {
    pub fn for_component(&self, label: &str) -> Option<&TypeError> {
        self.errors
            .iter()
            .find(|e| e.component.as_deref() == Some(label))
    }
}

impl fmt::Display for NetworkTypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, e) in self.errors.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            if let Some(c) = &e.component {
                write!(f, "{c}: ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for NetworkTypeError {}

/// Checks every component at its own base counter, joins the results and,
/// when the model declares a final environment, checks conformance to it.
pub fn typecheck_network(model: &Model, permissive_tstop: bool) -> Result<NetworkTyping, NetworkTypeError> {
    let placement = model
        .network
        .vms()
        .into_iter()
        .map(|(h, vm)| (vm.id.clone(), h.to_string()))
        .collect();
    let mut components = Vec::new();
    let mut errors = Vec::new();
    for c in model.components() {
        let counter = base_counter(&model.lattice, &model.env, &c.instance, &c.host);
        let ctx = TypeCtx {
            lattice: &model.lattice,
            channels: &model.channels,
            placement: &placement,
            vars: c.process.variables(),
            pages: c.pages.clone(),
            base: counter.clone(),
            permissive_tstop,
        };
        let loc = Loc::at(&c.instance, &c.host);
        let result = ctx
            .typecheck(&counter, &model.env, &loc, &c.process)
            .and_then(|t| match &model.signature {
                Some(sig) => conformance(&model.lattice, &t.env_after, sig, &t.provenance).map(|()| t),
                None => Ok(t),
            });
        match result {
            Ok(typing) => components.push(ComponentTyping {
                component: c,
                counter,
                typing,
            }),
            Err(mut e) => {
                e.component = Some(c.label());
                errors.push(e);
            }
        }
    }
    if !errors.is_empty() {
        return Err(NetworkTypeError { errors });
    }
    let mut env_after = model.env.clone();
    for ct in &components {
        let mut next = ct.typing.env_after.clone();
        reconcile_owners(&mut env_after, &mut next, &model.env);
        env_after = env_after.join(&next, &model.lattice).map_err(|e| {
            let mut err = TypeError::env("TPAR", &Path::root(), e);
            err.component = Some(ct.component.label());
            NetworkTypeError { errors: vec![err] }
        })?;
    }
    Ok(NetworkTyping {
        components,
        env_after,
    })
}
