use super::ast::*;
use crate::hash::fnv1a64;

/// Flattens a network into its parallel decomposition, one component per top-level
/// parallel operand of every instance, in canonical order.
pub fn normalize(n: &Network) -> Vec<Component> {
    let mut out: Vec<(u64, String, Component)> = Vec::new();
    for (host, vm) in n.vms() {
        for p in vm.body.par_operands() {
            let printed = p.to_string();
            out.push((
                fnv1a64(printed.as_bytes()),
                printed,
                Component {
                    host: host.to_string(),
                    instance: vm.id.clone(),
                    process: p.clone(),
                    pages: vm.pages.clone(),
                },
            ));
        }
    }
    out.sort_by(|a, b| {
        (&a.2.host, &a.2.instance, a.0, &a.1).cmp(&(&b.2.host, &b.2.instance, b.0, &b.1))
    });
    out.into_iter().map(|(_, _, c)| c).collect()
}

impl Network {
    /// Rebuilds a network from components. Components of the same instance are
    /// composed in parallel inside one instance term.
    pub fn from_components(components: &[Component]) -> Option<Network> {
        let mut hosts: Vec<(String, Vec<VmTerm>)> = Vec::new();
        for c in components {
            if hosts.last().map(|(h, _)| h != &c.host).unwrap_or(true) {
                hosts.push((c.host.clone(), Vec::new()));
            }
            let vms = &mut hosts.last_mut().expect("pushed above").1;
            match vms.iter_mut().find(|vm| vm.id == c.instance) {
                Some(vm) => {
                    let body = std::mem::replace(&mut vm.body, Process::Skip);
                    vm.body = Process::par(body, c.process.clone());
                }
                None => vms.push(VmTerm {
                    id: c.instance.clone(),
                    pages: c.pages.clone(),
                    body: c.process.clone(),
                }),
            }
        }
        hosts
            .into_iter()
            .map(|(id, vms)| {
                Network::Host(HostTerm {
                    id,
                    body: vms.into_iter().map(Hosted::Vm).reduce(Hosted::par),
                })
            })
            .reduce(Network::par)
    }
}
